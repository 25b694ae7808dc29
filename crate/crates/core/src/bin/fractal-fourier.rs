fn main() {
    std::process::exit(fractal_fourier::cli::run(std::env::args_os()));
}
