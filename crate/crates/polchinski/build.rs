use std::process::Command;

fn main() {
    println!("cargo:rerun-if-env-changed=POLCHINSKI_GIT_DESCRIBE");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
    println!("cargo:rerun-if-changed=../../.git/index");
    let describe = std::env::var("POLCHINSKI_GIT_DESCRIBE").ok().or_else(|| {
        let out = Command::new("git").args(["describe", "--always", "--dirty", "--tags"]).output().ok()?;
        if !out.status.success() {
            return None;
        }
        let s = String::from_utf8(out.stdout).ok()?.trim().to_string();
        (!s.is_empty()).then_some(s)
    });
    println!("cargo:rustc-env=POLCHINSKI_GIT_DESCRIBE={}", describe.unwrap_or_else(|| "unknown".into()));
}
