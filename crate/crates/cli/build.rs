fn main() {
    for (key, var) in [("MIXVAL_BUILD_PROFILE", "PROFILE"), ("MIXVAL_BUILD_TARGET", "TARGET")] {
        println!(
            "cargo:rustc-env={key}={}",
            std::env::var(var).unwrap_or_else(|_| "unknown".into())
        );
    }
}
