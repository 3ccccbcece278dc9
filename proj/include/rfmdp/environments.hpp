#pragma once

#include "rfmdp/model.hpp"
#include "rfmdp/solver.hpp"

#include <cstddef>
#include <map>
#include <string>
#include <utility>
#include <vector>

namespace rfmdp {

/// n machines on a bidirectional ring; factor value 1 = running.
struct SysAdminParams {
    std::size_t machines = 3;
    std::size_t horizon = 5;
    double p_fail_base = 0.05;
    double p_fail_neighbor = 0.15;
    double p_repair = 0.95;
};

/// N independent chains of length M; expected steps until every chain is final.
struct ChainParams {
    std::size_t chains = 1;
    std::size_t length = 3;
    double p_advance = 0.8;
};

/// N sectors of M stocks each, plus one ownership bit per sector.
struct StockParams {
    std::size_t sectors = 2;
    std::size_t stocks = 2;
    std::size_t horizon = 5;
    double p_rise_base = 0.3;
    double p_rise_per_rising = 0.4;
};

/// Two agents on an N x N grid with a joint action space of 16 moves.
struct FrozenLakeParams {
    std::size_t size = 3;
    double p_slip = 0.1;
    std::vector<std::pair<std::size_t, std::size_t>> holes;  ///< (row, column); default: centre cell for odd N >= 3
    bool default_holes = true;
    double avoid_penalty = 20.0;
};

FactoredMdp make_sysadmin(const SysAdminParams& params);
FactoredMdp make_chain(const ChainParams& params);
FactoredMdp make_stock(const StockParams& params);
FactoredMdp make_frozenlake(const FrozenLakeParams& params);

/// Domain name plus numeric parameters (missing keys take the defaults above).
struct BenchmarkSpec {
    std::string domain;
    std::map<std::string, double> params;
};

FactoredMdp generate_benchmark(const BenchmarkSpec& spec);

/// Every marginal row p becomes the box [max(0, p - eps), min(1, p + eps)].
RfMdp perturb_to_rfmdp(const FactoredMdp& model, double epsilon);

/// Every marginal row becomes an L1 ball of the given radius restricted to the row's support.
RfMdp perturb_to_l1_rfmdp(const FactoredMdp& model, double radius);

/// Flat counterpart of perturb_to_rfmdp: one box per (s, a) row over its support.
FlatBoxRmdp perturb_flat(const FlatMdp& model, double epsilon);

} // namespace rfmdp
