fn main() {
    std::process::exit(pns_bounds::cli::main());
}
