fn main() {
    sdass::cli::main()
}
