use std::path::PathBuf;

fn main() {
    // Regenerate include/interactee.h from the public extern "C" surface.
    let crate_dir = PathBuf::from(env!("CARGO_MANIFEST_DIR"));
    let out_path = crate_dir.join("include").join("interactee.h");
    std::fs::create_dir_all(out_path.parent().unwrap()).expect("create include dir");

    let config = cbindgen::Config::from_file(crate_dir.join("cbindgen.toml"))
        .expect("read cbindgen.toml");
    cbindgen::Builder::new()
        .with_crate(&crate_dir)
        .with_config(config)
        .generate()
        .expect("cbindgen generate")
        .write_to_file(&out_path);
    println!("cargo:rerun-if-changed=src/lib.rs");
    println!("cargo:rerun-if-changed=cbindgen.toml");
}
