#include <pybind11/pybind11.h>
PYBIND11_MODULE(_hetmed, m) { m.doc() = "placeholder"; }
