// Copyright 2026-present the meshboost authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <atomic>
#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "meshboost/common.hpp"

namespace meshboost::kernels {

namespace {

bool
cpu_has_avx2() {
#if defined(__x86_64__) || defined(__i386__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

const KernelTable<float> kScalarTable{&conv_forward_reference<float>, &conv_weight_grad_reference<float>};
const KernelTable<float> kAvx2Table{&avx2::conv_forward, &avx2::conv_weight_grad};
const KernelTable<double> kDoubleTable{&conv_forward_reference<double>, &conv_weight_grad_reference<double>};

std::atomic<Isa>&
active() {
    static std::atomic<Isa> isa{default_isa()};
    return isa;
}

}  // namespace

std::string_view
to_string(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return "scalar";
        case Isa::Avx2: return "avx2";
    }
    return "?";
}

bool
isa_available(Isa isa) {
    switch (isa) {
        case Isa::Scalar: return true;
        case Isa::Avx2: return avx2::kCompiled && cpu_has_avx2();
    }
    return false;
}

Isa
default_isa() {
    if (const char* env = std::getenv("MESHBOOST_ISA")) {
        const std::string v(env);
        if (v == "scalar") {
            return Isa::Scalar;
        }
        if (v == "avx2" && isa_available(Isa::Avx2)) {
            return Isa::Avx2;
        }
    }
    return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

Isa
active_isa() {
    return active().load();
}

void
set_active_isa(Isa isa) {
    if (!isa_available(isa)) {
        throw InvalidArgument("kernel variant '" + std::string(to_string(isa)) + "' is not available on this CPU");
    }
    active().store(isa);
}

const KernelTable<float>&
table(Isa isa) {
    if (!isa_available(isa)) {
        throw InvalidArgument("kernel variant '" + std::string(to_string(isa)) + "' is not available on this CPU");
    }
    return isa == Isa::Avx2 ? kAvx2Table : kScalarTable;
}

template <>
const KernelTable<float>&
active_table<float>() {
    return active_isa() == Isa::Avx2 ? kAvx2Table : kScalarTable;
}

template <>
const KernelTable<double>&
active_table<double>() {
    return kDoubleTable;
}

}  // namespace meshboost::kernels
