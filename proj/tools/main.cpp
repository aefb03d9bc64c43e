#include "app.hpp"

int main(int argc, char** argv) { return nlw::app::run_cli(argc, argv); }
