fn main() {
    std::process::exit(morse_spectra::cli::run());
}
