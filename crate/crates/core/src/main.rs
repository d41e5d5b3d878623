fn main() {
    std::process::exit(untrimmed_anticipation::cli::run(std::env::args_os()));
}
