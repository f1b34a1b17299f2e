fn main() {
    std::process::exit(haloscope::cli::main());
}
