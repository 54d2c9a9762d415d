fn main() {
    std::process::exit(finsler_plap::cli::run(std::env::args_os()));
}
