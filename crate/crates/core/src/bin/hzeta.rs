fn main() {
    std::process::exit(heisenberg_zeta::cli::dispatch(std::env::args()));
}
