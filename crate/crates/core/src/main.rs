fn main() {
    std::process::exit(spectrum_unfold::cli::run(std::env::args_os()));
}
