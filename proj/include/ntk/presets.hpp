#pragma once

#include <cstdint>

#include "ntk/eval.hpp"
#include "ntk/zoo.hpp"

namespace ntk {

// Self-contained sweep setups shared by the CLI presets and the experiment
// harness. Both are pure functions of the seed.

// Two pretrained synthetic hosts (4 and 5 dense layers over [0,1]^6) with a
// shared pool of 5 trigger and 1000 non-trigger inputs. The window is 1e-8:
// at this scale the pool's weighted sums are only ~1e-3 apart, so the usual
// 1e-4 default would admit accidental fires.
SweepPlan desk_sweep_plan(std::uint64_t seed);

// The trained four-bit classifier with trigger input 1111 against the other
// fifteen inputs; window at the usual 1e-4, harmless here because the
// pool sums are far coarser than the window.
SweepPlan paper_toy_plan(std::uint64_t seed);

}  // namespace ntk
