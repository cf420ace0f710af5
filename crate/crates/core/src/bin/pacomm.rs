fn main() {
    std::process::exit(pacomm::cli::main_with_args(std::env::args_os()));
}
