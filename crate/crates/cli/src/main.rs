fn main() {
    std::process::exit(smc_lab::main_with(std::env::args_os()));
}
