fn main() {
    std::process::exit(rml_core::cli::run(std::env::args_os()));
}
