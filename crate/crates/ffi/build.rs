use std::env;
use std::fs;
use std::path::PathBuf;

fn main() {
    let dir = PathBuf::from(env::var("CARGO_MANIFEST_DIR").unwrap());
    let config = cbindgen::Config::from_file(dir.join("cbindgen.toml")).expect("cbindgen.toml");
    let header = dir.join("include").join("zdforge.h");
    let mut bytes = Vec::new();
    cbindgen::Builder::new()
        .with_crate(&dir)
        .with_config(config)
        .generate()
        .expect("header generation")
        .write(&mut bytes);
    // rewrite only on change so the header's mtime stays put between builds
    if fs::read(&header).ok().as_deref() != Some(bytes.as_slice()) {
        fs::create_dir_all(header.parent().unwrap()).unwrap();
        fs::write(&header, bytes).unwrap();
    }
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
