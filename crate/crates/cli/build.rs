use std::process::Command;

/// Embeds a git-describe-style version so every report records the exact
/// build it came from. Falls back to the package version outside a checkout.
fn main() {
    let described = Command::new("git")
        .args(["describe", "--always", "--tags"])
        .output()
        .ok()
        .filter(|out| out.status.success())
        .and_then(|out| String::from_utf8(out.stdout).ok())
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty());

    let version = match described {
        Some(hash) => format!("{}+{hash}", env!("CARGO_PKG_VERSION")),
        None => env!("CARGO_PKG_VERSION").to_string(),
    };
    println!("cargo:rustc-env=MATLRT_VERSION={version}");
    println!("cargo:rerun-if-changed=../../.git/HEAD");
}
