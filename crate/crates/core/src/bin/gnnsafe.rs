fn main() {
    std::process::exit(gnnsafe::cli::run(std::env::args_os()));
}
