fn main() {
    std::process::exit(robust_mv::cli::run(std::env::args_os()));
}
