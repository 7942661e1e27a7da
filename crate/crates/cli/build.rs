use std::process::Command;

fn main() {
    let target = std::env::var("TARGET").unwrap_or_default();
    let profile = std::env::var("PROFILE").unwrap_or_default();
    let commit = Command::new("git")
        .args(["rev-parse", "--short", "HEAD"])
        .output()
        .ok()
        .filter(|o| o.status.success())
        .map(|o| String::from_utf8_lossy(&o.stdout).trim().to_string())
        .unwrap_or_else(|| "unknown".into());
    println!("cargo:rustc-env=FSWAD_BUILD_TARGET={target}");
    println!("cargo:rustc-env=FSWAD_BUILD_PROFILE={profile}");
    println!("cargo:rustc-env=FSWAD_BUILD_COMMIT={commit}");
    println!("cargo:rerun-if-changed=build.rs");
}
