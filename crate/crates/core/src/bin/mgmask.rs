fn main() {
    std::process::exit(mgmask::cli::run(std::env::args_os()));
}
