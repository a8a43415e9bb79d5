// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "robustnmt/kernels.hpp"

namespace robustnmt::kern {

// Arch-specific tables; each returns nullptr when the translation unit was
// built for a different architecture.
const Kernels* avx2_kernels_table();
const Kernels* neon_kernels_table();

}  // namespace robustnmt::kern
