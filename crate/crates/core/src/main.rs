fn main() {
    std::process::exit(pas_core::cli::run(std::env::args_os()));
}
