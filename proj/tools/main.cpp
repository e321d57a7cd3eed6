#include "xsect/app.hpp"

int main(int argc, char** argv) { return xsect::run_app(argc, argv); }
