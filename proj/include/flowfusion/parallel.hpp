#pragma once

namespace flowfusion {

/// Selects the OpenMP kernels or the serial reference loops.
enum class Execution { parallel, serial };

/// Caps the OpenMP worker count; values < 1 are ignored.
void set_worker_threads(int n);
/// Applies FLOWFUSION_THREADS from the environment if set. Returns the cap in
/// effect, or 0 when the variable is absent or unparsable.
int apply_thread_env();
int worker_threads();

}  // namespace flowfusion
