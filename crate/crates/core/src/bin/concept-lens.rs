fn main() {
    std::process::exit(concept_lens::cli::run(std::env::args_os()));
}
