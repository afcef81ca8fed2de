fn main() {
    std::process::exit(omega_ideals::cli::run(std::env::args_os()));
}
