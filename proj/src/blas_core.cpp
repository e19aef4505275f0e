// Runs before the statically linked OpenBLAS reads its environment (its own
// initializer sits at priority 101). The Cooper Lake and SkylakeX kernels of
// the packaged OpenBLAS return wrong results on some AVX-512 virtual machines,
// so the Haswell kernels are selected unless the user chose a core explicitly.
#include <cstdlib>

namespace {

void select_blas_core() { setenv("OPENBLAS_CORETYPE", "Haswell", 0); }

[[gnu::used, gnu::section(".init_array.00100")]] void (*const init_entry)() = select_blas_core;

}  // namespace
