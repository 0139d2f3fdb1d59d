fn main() {
    std::process::exit(formation_core::cli::run(std::env::args_os()));
}
