fn main() {
    std::process::exit(admg_augment::cli::main());
}
