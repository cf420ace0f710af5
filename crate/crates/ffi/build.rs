use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(std::env::var("CARGO_MANIFEST_DIR").unwrap());
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
    let config =
        cbindgen::Config::from_file(dir.join("cbindgen.toml")).expect("read cbindgen.toml");
    match cbindgen::generate_with_config(&dir, config) {
        // write_to_file leaves the header untouched when nothing changed
        Ok(bindings) => {
            bindings.write_to_file(dir.join("include/pacomm.h"));
        }
        Err(e) => println!("cargo:warning=header not regenerated: {e}"),
    }
}
