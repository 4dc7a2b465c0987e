fn main() {
    std::process::exit(modrecip::cli::main());
}
