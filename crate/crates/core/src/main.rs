fn main() {
    std::process::exit(somnogray::cli::run(std::env::args_os()));
}
