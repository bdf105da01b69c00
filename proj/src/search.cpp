#include "pgmpp/search.hpp"

#include <algorithm>

#include "pgmpp/errors.hpp"

namespace pgmpp {

std::size_t predecessor_in_window(std::span<const Key> level_keys, std::size_t center,
                                  std::size_t radius, Key key, SearchThreshold threshold) {
    if (level_keys.empty()) {
        throw InvalidState("predecessor_in_window on an empty level");
    }
    const std::size_t last = level_keys.size() - 1;
    center = std::min(center, last);
    const std::size_t lo = center > radius ? center - radius : 0;
    const std::size_t hi = std::min(last, last - center < radius ? last : center + radius);
    const std::size_t count = hybrid_upper_bound(level_keys.subspan(lo, hi - lo + 1), key, threshold);
    return count == 0 ? lo : lo + count - 1;
}

} // namespace pgmpp
