#include "app.hpp"

int main(int argc, char** argv) { return propattest::cli::run_app(argc, argv); }
