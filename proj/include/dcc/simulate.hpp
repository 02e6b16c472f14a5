#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <ostream>
#include <random>
#include <vector>

#include "dcc/combinatorics.hpp"
#include "dcc/errors.hpp"
#include "dcc/model.hpp"
#include "dcc/rate.hpp"

namespace dcc::sim {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    std::uint64_t z = (state += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

/// Deterministic stream seed derived from a master seed and a few labels, so
/// parallel and serial trial orders agree bit for bit.
inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0) {
    std::uint64_t state = master;
    std::uint64_t h = splitmix64(state);
    state ^= a + 0x9e3779b97f4a7c15ull;
    h ^= splitmix64(state);
    state ^= b + 0xc2b2ae3d27d4eb4full;
    h ^= splitmix64(state);
    state ^= c + 0x165667b19e3779f9ull;
    h ^= splitmix64(state);
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next() { return engine_(); }

    // unbiased integer in [0, n) by rejection
    std::uint64_t below(std::uint64_t n) {
        const std::uint64_t limit = std::numeric_limits<std::uint64_t>::max() -
                                    std::numeric_limits<std::uint64_t>::max() % n;
        std::uint64_t v;
        do {
            v = engine_();
        } while (v >= limit);
        return v % n;
    }

    double unit() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

private:
    std::mt19937_64 engine_;
};

struct BitVec {
    std::vector<std::uint64_t> words;
    std::size_t n_bits = 0;

    void resize(std::size_t bits) {
        n_bits = bits;
        words.assign((bits + 63) / 64, 0);
    }
    bool get(std::size_t i) const { return (words[i >> 6] >> (i & 63)) & 1u; }
    void set(std::size_t i, bool v) {
        if (v)
            words[i >> 6] |= std::uint64_t{1} << (i & 63);
        else
            words[i >> 6] &= ~(std::uint64_t{1} << (i & 63));
    }
    void flip(std::size_t i) { words[i >> 6] ^= std::uint64_t{1} << (i & 63); }

    // xor `other` into this vector, aligned at bit zero; this vector must be
    // at least as long (zero-padding semantics)
    void xor_prefix(const BitVec& other) {
        for (std::size_t w = 0; w < other.words.size(); ++w) words[w] ^= other.words[w];
    }
};

inline BitVec random_bits(std::uint64_t seed, std::size_t bits) {
    BitVec v;
    v.resize(bits);
    std::uint64_t state = seed;
    for (std::uint64_t& w : v.words) w = splitmix64(state);
    if (bits % 64 != 0 && !v.words.empty())
        v.words.back() &= (std::uint64_t{1} << (bits % 64)) - 1;
    return v;
}

/// Pseudo-random but reproducible content of one file.
inline BitVec file_content(std::uint64_t master_seed, int file, std::uint32_t bits) {
    return random_bits(derive_seed(master_seed, 0x11c0ull, static_cast<std::uint64_t>(file)),
                       bits);
}

/// The realized random placement: per user and file, the exact set of cached
/// bit indices. The cached count is round(q_n F_n); the rounding residual is
/// recorded.
struct BitPlacement {
    std::vector<std::vector<std::vector<std::uint32_t>>> cached;  // [user][file], sorted
    std::vector<std::uint32_t> file_bits;
    std::uint64_t seed = 0;
    double max_rounding_residual = 0.0;

    int n_users() const { return static_cast<int>(cached.size()); }
};

/// Each user independently samples a uniform subset of exactly round(q_n F_n)
/// bit indices per file (sampling without replacement).
inline BitPlacement random_placement(const std::vector<double>& q, const FileCatalog& cat,
                                     int n_users, std::uint64_t seed) {
    const int n = cat.n_files();
    if (static_cast<int>(q.size()) != n) throw LengthMismatch("placement length != catalog");
    BitPlacement placement;
    placement.seed = seed;
    placement.file_bits.resize(static_cast<std::size_t>(n));
    for (int f = 0; f < n; ++f) {
        const double bits = cat.sizes[static_cast<std::size_t>(f)];
        if (!(bits >= 1.0)) throw OutOfRange("simulation needs file sizes of at least one bit");
        placement.file_bits[static_cast<std::size_t>(f)] =
            static_cast<std::uint32_t>(std::llround(bits));
    }
    placement.cached.assign(static_cast<std::size_t>(n_users), {});
    std::vector<std::uint32_t> pool;
    for (int u = 0; u < n_users; ++u) {
        auto& per_file = placement.cached[static_cast<std::size_t>(u)];
        per_file.resize(static_cast<std::size_t>(n));
        for (int f = 0; f < n; ++f) {
            const std::uint32_t bits = placement.file_bits[static_cast<std::size_t>(f)];
            const double exact = q[static_cast<std::size_t>(f)] * static_cast<double>(bits);
            const std::uint32_t count = static_cast<std::uint32_t>(
                std::min<double>(std::llround(exact), static_cast<double>(bits)));
            placement.max_rounding_residual = std::max(
                placement.max_rounding_residual, std::abs(exact - static_cast<double>(count)));
            pool.resize(bits);
            for (std::uint32_t i = 0; i < bits; ++i) pool[i] = i;
            Rng rng(derive_seed(seed, 0xacedull, static_cast<std::uint64_t>(u),
                                static_cast<std::uint64_t>(f)));
            for (std::uint32_t i = 0; i < count; ++i) {
                const std::uint32_t j =
                    i + static_cast<std::uint32_t>(rng.below(bits - i));
                std::swap(pool[i], pool[j]);
            }
            auto& slot = per_file[static_cast<std::size_t>(f)];
            slot.assign(pool.begin(), pool.begin() + count);
            std::sort(slot.begin(), slot.end());
        }
    }
    return placement;
}

/// For every file, the bits grouped by exactly which active users cache them;
/// bucket masks are over positions in `active`. Bucket 0 is the uncached part.
struct SubfilePartition {
    std::vector<int> active;
    std::vector<std::uint32_t> file_bits;
    std::uint64_t seed = 0;
    std::vector<std::vector<std::vector<std::uint32_t>>> bits;  // [file][mask], sorted
};

inline SubfilePartition partition_subfiles(const BitPlacement& placement,
                                           const std::vector<int>& active) {
    const int a = static_cast<int>(active.size());
    if (a > 12) throw OutOfRange("partition limited to 12 active users");
    const int n = static_cast<int>(placement.file_bits.size());
    SubfilePartition partition;
    partition.active = active;
    partition.file_bits = placement.file_bits;
    partition.seed = placement.seed;
    partition.bits.resize(static_cast<std::size_t>(n));
    std::vector<std::uint32_t> mask_of;
    for (int f = 0; f < n; ++f) {
        const std::uint32_t bits = placement.file_bits[static_cast<std::size_t>(f)];
        mask_of.assign(bits, 0);
        for (int i = 0; i < a; ++i) {
            const int user = active[static_cast<std::size_t>(i)];
            for (std::uint32_t idx :
                 placement.cached[static_cast<std::size_t>(user)][static_cast<std::size_t>(f)])
                mask_of[idx] |= std::uint32_t{1} << i;
        }
        auto& buckets = partition.bits[static_cast<std::size_t>(f)];
        buckets.assign(std::size_t{1} << a, {});
        for (std::uint32_t idx = 0; idx < bits; ++idx) buckets[mask_of[idx]].push_back(idx);
    }
    return partition;
}

/// One multicast message: the XOR of one subfile per targeted user, shorter
/// subfiles zero-padded, so the payload is as long as the largest constituent.
struct CodedMessage {
    std::uint32_t subset_mask = 0;                    // over active positions
    std::vector<std::pair<int, std::uint32_t>> parts; // constituent (file, bucket mask)
    std::vector<std::uint32_t> part_lengths;
    BitVec payload;
};

namespace detail {

inline BitVec extract_subfile(const SubfilePartition& partition, const BitVec& content, int file,
                              std::uint32_t bucket) {
    const auto& idx = partition.bits[static_cast<std::size_t>(file)][bucket];
    BitVec out;
    out.resize(idx.size());
    for (std::size_t b = 0; b < idx.size(); ++b) out.set(b, content.get(idx[b]));
    return out;
}

}  // namespace detail

/// Runs the coded delivery for one demand vector: one message per
/// non-redundant group. Messages that would carry zero bits are not sent.
inline std::vector<CodedMessage> deliver(const DemandScenario& scenario,
                                         const SubfilePartition& partition,
                                         const LeaderGroup& leaders) {
    const int a = scenario.n_active();
    std::uint32_t leader_mask = 0;
    for (int u : leaders.users) {
        auto it = std::lower_bound(scenario.active.begin(), scenario.active.end(), u);
        if (it == scenario.active.end() || *it != u)
            throw OutOfRange("leader outside active set");
        leader_mask |= std::uint32_t{1} << (it - scenario.active.begin());
    }
    std::vector<BitVec> contents(partition.file_bits.size());
    std::vector<char> have_content(partition.file_bits.size(), 0);
    auto content_of = [&](int file) -> const BitVec& {
        if (!have_content[static_cast<std::size_t>(file)]) {
            contents[static_cast<std::size_t>(file)] = file_content(
                partition.seed, file, partition.file_bits[static_cast<std::size_t>(file)]);
            have_content[static_cast<std::size_t>(file)] = 1;
        }
        return contents[static_cast<std::size_t>(file)];
    };

    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 1; mask < (std::uint32_t{1} << a); ++mask)
        if ((mask & leader_mask) != 0) masks.push_back(mask);
    std::stable_sort(masks.begin(), masks.end(), [](std::uint32_t lhs, std::uint32_t rhs) {
        const int pl = __builtin_popcount(lhs), pr = __builtin_popcount(rhs);
        if (pl != pr) return pl < pr;
        return lhs < rhs;
    });

    std::vector<CodedMessage> messages;
    for (std::uint32_t mask : masks) {
        CodedMessage msg;
        msg.subset_mask = mask;
        std::uint32_t longest = 0;
        std::uint32_t bits = mask;
        while (bits != 0) {
            const int i = __builtin_ctz(bits);
            bits &= bits - 1;
            const int file = scenario.demands[static_cast<std::size_t>(i)];
            const std::uint32_t bucket = mask & ~(std::uint32_t{1} << i);
            const std::uint32_t length = static_cast<std::uint32_t>(
                partition.bits[static_cast<std::size_t>(file)][bucket].size());
            msg.parts.push_back({file, bucket});
            msg.part_lengths.push_back(length);
            longest = std::max(longest, length);
        }
        if (longest == 0) continue;
        msg.payload.resize(longest);
        for (const auto& [file, bucket] : msg.parts)
            msg.payload.xor_prefix(detail::extract_subfile(partition, content_of(file), file,
                                                           bucket));
        messages.push_back(std::move(msg));
    }
    return messages;
}

inline std::uint64_t delivered_bits(const std::vector<CodedMessage>& messages) {
    std::uint64_t total = 0;
    for (const CodedMessage& m : messages) total += m.payload.n_bits;
    return total;
}

enum class DecodeMethod {
    mccs_peeling,  // synthesize redundant messages from non-redundant ones, then peel
    gf2_rank,      // ground-truth span check over GF(2), for tiny instances
};

struct DecodeWitness {
    int user = -1;
    int file = -1;
    std::uint32_t bit = 0;
};

struct DecodeOutcome {
    std::vector<char> user_ok;  // aligned with the scenario's active list
    std::optional<DecodeWitness> witness;

    bool all_ok() const {
        for (char ok : user_ok)
            if (!ok) return false;
        return true;
    }
};

namespace detail {

// Synthesis of a redundant message: XOR the non-redundant messages obtained by
// swapping every subset of its users (with pairwise-distinct requests) for the
// leaders of their files. Every subfile except the wanted ones cancels.
inline BitVec synthesize_redundant(std::uint32_t target_mask, const DemandScenario& scenario,
                                   const SubfilePartition& partition,
                                   const std::vector<int>& leader_of_file_position,
                                   const std::map<std::uint32_t, const CodedMessage*>& sent) {
    std::uint32_t nominal = 0;
    {
        std::uint32_t bits = target_mask;
        while (bits != 0) {
            const int i = __builtin_ctz(bits);
            bits &= bits - 1;
            const int file = scenario.demands[static_cast<std::size_t>(i)];
            const std::uint32_t bucket = target_mask & ~(std::uint32_t{1} << i);
            nominal = std::max(nominal, static_cast<std::uint32_t>(
                partition.bits[static_cast<std::size_t>(file)][bucket].size()));
        }
    }
    BitVec acc;
    acc.resize(nominal);

    // iterate nonempty sub-subsets with pairwise distinct demands
    for (std::uint32_t swap = target_mask; swap != 0; swap = (swap - 1) & target_mask) {
        bool distinct = true;
        std::uint32_t replaced = 0;
        std::uint32_t bits = swap;
        while (bits != 0) {
            const int i = __builtin_ctz(bits);
            bits &= bits - 1;
            const int file = scenario.demands[static_cast<std::size_t>(i)];
            const std::uint32_t leader_bit =
                std::uint32_t{1}
                << leader_of_file_position[static_cast<std::size_t>(file)];
            if (replaced & leader_bit) {
                distinct = false;
                break;
            }
            replaced |= leader_bit;
        }
        if (!distinct) continue;
        const std::uint32_t source = (target_mask & ~swap) | replaced;
        auto it = sent.find(source);
        if (it == sent.end()) continue;  // zero-length message transmits nothing
        const CodedMessage& msg = *it->second;
        if (msg.payload.n_bits > acc.n_bits) {
            BitVec wider;
            wider.resize(msg.payload.n_bits);
            wider.xor_prefix(acc);
            acc = std::move(wider);
        }
        acc.xor_prefix(msg.payload);
    }
    // everything beyond the nominal length must already have cancelled
    BitVec out;
    out.resize(nominal);
    for (std::size_t b = 0; b < nominal; ++b) out.set(b, b < acc.n_bits && acc.get(b));
    return out;
}

inline bool mccs_decode_user(int position, const DemandScenario& scenario,
                             const BitPlacement& placement, const SubfilePartition& partition,
                             const std::map<std::uint32_t, const CodedMessage*>& sent,
                             const std::vector<int>& leader_of_file_position,
                             DecodeWitness& witness) {
    const int a = scenario.n_active();
    const int user = scenario.active[static_cast<std::size_t>(position)];
    const int wanted = scenario.demands[static_cast<std::size_t>(position)];
    const std::uint32_t bits_total = partition.file_bits[static_cast<std::size_t>(wanted)];
    const BitVec truth = file_content(partition.seed, wanted, bits_total);

    std::vector<char> have(bits_total, 0);
    std::vector<char> value(bits_total, 0);
    for (std::uint32_t idx :
         placement.cached[static_cast<std::size_t>(user)][static_cast<std::size_t>(wanted)]) {
        have[idx] = 1;
        value[idx] = truth.get(idx);
    }

    std::vector<BitVec> content_cache(partition.file_bits.size());
    std::vector<char> have_content(partition.file_bits.size(), 0);
    auto content_of = [&](int file) -> const BitVec& {
        if (!have_content[static_cast<std::size_t>(file)]) {
            content_cache[static_cast<std::size_t>(file)] = file_content(
                partition.seed, file, partition.file_bits[static_cast<std::size_t>(file)]);
            have_content[static_cast<std::size_t>(file)] = 1;
        }
        return content_cache[static_cast<std::size_t>(file)];
    };

    std::uint32_t leader_mask = 0;
    for (int f = 0; f < static_cast<int>(leader_of_file_position.size()); ++f)
        if (leader_of_file_position[static_cast<std::size_t>(f)] >= 0)
            leader_mask |= std::uint32_t{1}
                           << leader_of_file_position[static_cast<std::size_t>(f)];

    const std::uint32_t self_bit = std::uint32_t{1} << position;
    const std::uint32_t others = ((std::uint32_t{1} << a) - 1u) & ~self_bit;
    // every subset T of the other users contributes the subfile cached by
    // exactly T, peeled from the message targeting T plus this user
    std::uint32_t subset = others;
    while (true) {
        const std::uint32_t message_mask = subset | self_bit;
        const auto& indices =
            partition.bits[static_cast<std::size_t>(wanted)][subset];
        if (!indices.empty()) {
            BitVec payload;
            if ((message_mask & leader_mask) != 0) {
                auto it = sent.find(message_mask);
                if (it != sent.end())
                    payload = it->second->payload;
                else
                    payload.resize(0);
            } else {
                payload = synthesize_redundant(message_mask, scenario, partition,
                                               leader_of_file_position, sent);
            }
            // strip the other users' subfiles using this user's own cache
            std::uint32_t bits = message_mask & ~self_bit;
            while (bits != 0) {
                const int j = __builtin_ctz(bits);
                bits &= bits - 1;
                const int file = scenario.demands[static_cast<std::size_t>(j)];
                const std::uint32_t bucket = message_mask & ~(std::uint32_t{1} << j);
                const auto& other_idx =
                    partition.bits[static_cast<std::size_t>(file)][bucket];
                const BitVec& content = content_of(file);
                for (std::size_t b = 0; b < other_idx.size() && b < payload.n_bits; ++b)
                    if (content.get(other_idx[b])) payload.flip(b);
            }
            for (std::size_t b = 0; b < indices.size(); ++b) {
                const bool bit = b < payload.n_bits && payload.get(b);
                have[indices[b]] = 1;
                value[indices[b]] = bit;
            }
        }
        if (subset == 0) break;
        subset = (subset - 1) & others;
    }

    for (std::uint32_t idx = 0; idx < bits_total; ++idx) {
        if (!have[idx] || value[idx] != truth.get(idx)) {
            witness = {user, wanted, idx};
            return false;
        }
    }
    return true;
}

// Ground-truth decodability: Gaussian elimination over GF(2) on the user's
// cached unit vectors plus the received message equations.
inline bool rank_decode_user(int position, const DemandScenario& scenario,
                             const BitPlacement& placement, const SubfilePartition& partition,
                             const std::vector<const CodedMessage*>& received,
                             DecodeWitness& witness) {
    const int n = static_cast<int>(partition.file_bits.size());
    std::vector<std::size_t> offset(static_cast<std::size_t>(n) + 1, 0);
    for (int f = 0; f < n; ++f)
        offset[static_cast<std::size_t>(f) + 1] =
            offset[static_cast<std::size_t>(f)] + partition.file_bits[static_cast<std::size_t>(f)];
    const std::size_t total = offset.back();
    if (total > 4096) throw OutOfRange("rank oracle limited to 4096 total bits");

    const int user = scenario.active[static_cast<std::size_t>(position)];
    std::vector<BitVec> rows;
    for (int f = 0; f < n; ++f)
        for (std::uint32_t idx :
             placement.cached[static_cast<std::size_t>(user)][static_cast<std::size_t>(f)]) {
            BitVec row;
            row.resize(total);
            row.set(offset[static_cast<std::size_t>(f)] + idx, true);
            rows.push_back(std::move(row));
        }
    for (const CodedMessage* msg : received) {
        for (std::size_t b = 0; b < msg->payload.n_bits; ++b) {
            BitVec row;
            row.resize(total);
            for (std::size_t part = 0; part < msg->parts.size(); ++part) {
                if (b >= msg->part_lengths[part]) continue;
                const auto& [file, bucket] = msg->parts[part];
                const std::uint32_t idx =
                    partition.bits[static_cast<std::size_t>(file)][bucket][b];
                row.flip(offset[static_cast<std::size_t>(file)] + idx);
            }
            rows.push_back(std::move(row));
        }
    }

    // reduce to row echelon form, tracking pivot columns
    std::vector<std::size_t> pivot_col;
    std::vector<BitVec> basis;
    for (BitVec& row : rows) {
        for (std::size_t r = 0; r < basis.size(); ++r)
            if (row.get(pivot_col[r])) row.xor_prefix(basis[r]);
        std::size_t lead = total;
        for (std::size_t c = 0; c < total; ++c)
            if (row.get(c)) {
                lead = c;
                break;
            }
        if (lead == total) continue;
        for (std::size_t r = 0; r < basis.size(); ++r)
            if (basis[r].get(lead)) basis[r].xor_prefix(row);
        basis.push_back(std::move(row));
        pivot_col.push_back(lead);
    }
    std::vector<char> in_span(total, 0);
    for (std::size_t r = 0; r < basis.size(); ++r) {
        // a unit vector is in the span iff its column is a pivot whose row is
        // that unit vector; after full reduction this is the pivot row weight
        std::size_t weight = 0;
        for (std::size_t c = 0; c < total && weight < 2; ++c)
            if (basis[r].get(c)) ++weight;
        if (weight == 1) in_span[pivot_col[r]] = 1;
    }
    const int wanted = scenario.demands[static_cast<std::size_t>(position)];
    for (std::uint32_t idx = 0; idx < partition.file_bits[static_cast<std::size_t>(wanted)];
         ++idx) {
        if (!in_span[offset[static_cast<std::size_t>(wanted)] + idx]) {
            witness = {user, wanted, idx};
            return false;
        }
    }
    return true;
}

}  // namespace detail

/// Checks that every active user can reconstruct its requested file from its
/// cache and the multicast messages, at bit granularity.
inline DecodeOutcome decode_check(const DemandScenario& scenario, const BitPlacement& placement,
                                  const std::vector<CodedMessage>& messages,
                                  DecodeMethod method = DecodeMethod::mccs_peeling) {
    const int a = scenario.n_active();
    const SubfilePartition partition = partition_subfiles(placement, scenario.active);
    std::map<std::uint32_t, const CodedMessage*> sent;
    std::vector<const CodedMessage*> received;
    for (const CodedMessage& m : messages) {
        sent[m.subset_mask] = &m;
        received.push_back(&m);
    }
    // position of the canonical leader of each requested file
    std::vector<int> leader_of_file(placement.file_bits.size(), -1);
    for (int i = 0; i < a; ++i) {
        const int file = scenario.demands[static_cast<std::size_t>(i)];
        if (leader_of_file[static_cast<std::size_t>(file)] < 0)
            leader_of_file[static_cast<std::size_t>(file)] = i;
    }

    DecodeOutcome outcome;
    outcome.user_ok.assign(static_cast<std::size_t>(a), 1);
    for (int i = 0; i < a; ++i) {
        DecodeWitness witness;
        const bool ok =
            method == DecodeMethod::mccs_peeling
                ? detail::mccs_decode_user(i, scenario, placement, partition, sent,
                                           leader_of_file, witness)
                : detail::rank_decode_user(i, scenario, placement, partition, received, witness);
        outcome.user_ok[static_cast<std::size_t>(i)] = ok;
        if (!ok && !outcome.witness) outcome.witness = witness;
    }
    return outcome;
}

struct EmpiricalRate {
    double mean = 0.0;
    double std_error = 0.0;
    int trials = 0;
};

using DemandSampler = std::function<DemandScenario(Rng&)>;

/// Sampler matching the analytic model: independent per-user activity draws,
/// demands i.i.d. from the popularity distribution.
inline DemandSampler model_demand_sampler(const FileCatalog& cat, const UserPopulation& users) {
    const int k = users.n_users();
    const int n = cat.n_files();
    std::vector<double> cumulative(static_cast<std::size_t>(n));
    double acc = 0.0;
    for (int f = 0; f < n; ++f) {
        acc += cat.popularity[static_cast<std::size_t>(f)];
        cumulative[static_cast<std::size_t>(f)] = acc;
    }
    return [k, n, acc, cumulative = std::move(cumulative),
            activity = users.activity](Rng& rng) {
        DemandScenario scenario;
        for (int u = 0; u < k; ++u)
            if (rng.unit() < activity[static_cast<std::size_t>(u)]) scenario.active.push_back(u);
        for (std::size_t i = 0; i < scenario.active.size(); ++i) {
            const double draw = rng.unit();
            const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), draw * acc);
            scenario.demands.push_back(
                static_cast<int>(std::min<std::ptrdiff_t>(it - cumulative.begin(), n - 1)));
        }
        return scenario;
    };
}

/// Monte Carlo estimate of the average delivery rate with a fresh random
/// placement per trial. Converges to the exact average as the trial count and
/// file sizes grow.
inline EmpiricalRate empirical_rate(const std::vector<double>& q, const FileCatalog& cat,
                                    const UserPopulation& users, int trials, std::uint64_t seed,
                                    const DemandSampler& sampler = {}) {
    if (trials < 1) throw OutOfRange("empirical_rate needs at least one trial");
    const int k = users.n_users();
    const DemandSampler draw_scenario =
        sampler ? sampler : model_demand_sampler(cat, users);

    double sum = 0.0, sum_sq = 0.0;
    for (int trial = 0; trial < trials; ++trial) {
        Rng rng(derive_seed(seed, 0x7217ull, static_cast<std::uint64_t>(trial)));
        const DemandScenario scenario = draw_scenario(rng);
        double bits = 0.0;
        if (!scenario.active.empty()) {
            const BitPlacement placement = random_placement(
                q, cat, k, derive_seed(seed, 0x91acull, static_cast<std::uint64_t>(trial)));
            const SubfilePartition partition = partition_subfiles(placement, scenario.active);
            const std::vector<CodedMessage> messages =
                deliver(scenario, partition, canonical_leader_group(scenario));
            bits = static_cast<double>(delivered_bits(messages));
        }
        sum += bits;
        sum_sq += bits * bits;
    }
    EmpiricalRate out;
    out.trials = trials;
    out.mean = sum / trials;
    if (trials > 1) {
        const double variance =
            std::max(0.0, (sum_sq - sum * sum / trials) / (trials - 1));
        out.std_error = std::sqrt(variance / trials);
    }
    return out;
}

/// One-trial textual trace: placement sizes, message lengths, decode verdicts.
inline void write_trace(std::ostream& os, int trial, const DemandScenario& scenario,
                        const BitPlacement& placement,
                        const std::vector<CodedMessage>& messages,
                        const DecodeOutcome* outcome = nullptr) {
    os << "trial " << trial << " active";
    for (int u : scenario.active) os << ' ' << u;
    os << " demands";
    for (int d : scenario.demands) os << ' ' << d;
    os << '\n';
    for (int u = 0; u < placement.n_users(); ++u) {
        os << "  user " << u << " cached";
        for (const auto& slot : placement.cached[static_cast<std::size_t>(u)])
            os << ' ' << slot.size();
        os << '\n';
    }
    for (const CodedMessage& m : messages)
        os << "  message mask=" << m.subset_mask << " bits=" << m.payload.n_bits << '\n';
    if (outcome != nullptr) {
        os << "  decode";
        for (char ok : outcome->user_ok) os << ' ' << (ok ? "ok" : "FAIL");
        os << '\n';
    }
}

}  // namespace dcc::sim
