fn main() {
    std::process::exit(manifold_mcmc::cli::run(std::env::args_os()));
}
