fn main() {
    std::process::exit(policy_tree::cli::run(std::env::args_os()));
}
