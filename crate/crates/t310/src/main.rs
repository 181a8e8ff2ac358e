fn main() { std::process::exit(t310::cli::run()); }
