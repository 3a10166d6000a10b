#pragma once

#include <cstdint>
#include <vector>

#include "syncflow/protocol.hpp"

namespace syncflow {

/// Reference schedule built from an explicit event timeline.
///
/// Producer messages m become consumable at m/f_i + tau and consumer callbacks
/// happen at k/f_n; events are sorted (arrival before callback on ties) and
/// swept to count what each callback may consume. Acyclic channels force the
/// k = 0 entry to 1. Cyclic channels force it to 0, then take the arrivals of
/// the callback window shifted by one callback (backward when f_n <= f_i,
/// forward by the number of consumer callbacks inside one producer period
/// otherwise), capped by the messages actually arrived by callback k.
///
/// Shares no code with the closed-form counts; used to cross-check them.
/// Returns k_max + 1 entries.
std::vector<std::uint64_t> oracle_expected_schedule(const ChannelTiming& timing,
                                                    std::uint64_t k_max,
                                                    TickGrid grid = {});

}  // namespace syncflow
