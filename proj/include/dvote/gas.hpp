#pragma once

#include <cstdint>
#include <stdexcept>

#include "dvote/program.hpp"

namespace dvote::arb {

struct GasEstimate {
    uint64_t gas = 0;
    uint64_t block_gas_limit = 0;

    uint64_t full_blocks() const { return gas / block_gas_limit; }
    uint64_t remainder() const { return gas % block_gas_limit; }
};

// Cost model of the simulated layer 1. The defaults reproduce the reference
// numbers: 30e9 flops -> 90e9 gas -> 3000x a 30M block limit.
struct GasModel {
    uint64_t gas_per_flop = 3;
    uint64_t block_gas_limit = 30'000'000;
    // Charged per digest touched while verifying a Merkle opening.
    uint64_t proof_unit_cost = 32;

    GasEstimate estimate(uint64_t flops) const {
        if (flops == 0) throw std::invalid_argument("flop count must be positive");
        return GasEstimate{flops * gas_per_flop, block_gas_limit};
    }

    uint64_t micro_op_gas(const vm::MicroOp& op) const {
        return vm::micro_op_cost(op.kind, op.len);
    }

    uint64_t proof_gas(uint64_t digests_verified) const {
        return digests_verified * proof_unit_cost;
    }
};

}  // namespace dvote::arb
