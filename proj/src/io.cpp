#include "rfmdp/io.hpp"

#include "rfmdp/environments.hpp"
#include "rfmdp/error.hpp"

#include <fstream>
#include <sstream>

#include <fmt/format.h>
#include <json.hpp>

namespace rfmdp {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& message) { throw Error(ErrorKind::parse, message); }

const json& field(const json& j, const char* key, std::string_view context) {
    if (!j.is_object()) fail(fmt::format("{}: expected an object", context));
    const auto it = j.find(key);
    if (it == j.end()) fail(fmt::format("{}: missing key '{}'", context, key));
    return *it;
}

template <class T>
T as(const json& j, std::string_view what) {
    try {
        return j.get<T>();
    } catch (const json::exception&) {
        fail(fmt::format("{}: unexpected value {}", what, j.dump()));
    }
}

std::size_t as_index(const json& j, std::string_view what) {
    if (!j.is_number_integer() || j.get<long long>() < 0) fail(fmt::format("{}: expected a non-negative integer", what));
    return j.get<std::size_t>();
}

ObjectiveKind parse_kind(std::string_view name) {
    for (auto k : {ObjectiveKind::discounted_reward, ObjectiveKind::finite_horizon_reward, ObjectiveKind::reachability,
                   ObjectiveKind::expected_steps})
        if (to_string(k) == name) return k;
    fail(fmt::format("unknown objective kind '{}'", name));
}

Direction parse_direction(std::string_view name) {
    if (name == "maximize") return Direction::maximize;
    if (name == "minimize") return Direction::minimize;
    fail(fmt::format("unknown direction '{}'", name));
}

std::vector<StateIndex> state_list(const json& j, std::string_view what) {
    std::vector<StateIndex> out;
    if (!j.is_array()) fail(fmt::format("{}: expected a list of states", what));
    for (const auto& s : j) out.push_back(as_index(s, what));
    return out;
}

Objective parse_objective(const json& j) {
    Objective o;
    o.kind = parse_kind(as<std::string>(field(j, "kind", "objective"), "objective.kind"));
    const bool goal = o.kind == ObjectiveKind::reachability || o.kind == ObjectiveKind::expected_steps;
    o.direction = o.kind == ObjectiveKind::expected_steps ? Direction::minimize : Direction::maximize;
    if (j.contains("direction")) o.direction = parse_direction(as<std::string>(j["direction"], "objective.direction"));
    if (o.kind == ObjectiveKind::discounted_reward)
        o.discount = j.contains("discount") ? as<double>(j["discount"], "objective.discount") : default_discount;
    if (o.kind == ObjectiveKind::finite_horizon_reward)
        o.horizon = as_index(field(j, "horizon", "objective"), "objective.horizon");
    if (goal) o.targets = state_list(field(j, "targets", "objective"), "objective.targets");
    if (j.contains("avoid")) o.avoid = state_list(j["avoid"], "objective.avoid");
    if (j.contains("avoid_value")) o.avoid_value = as<double>(j["avoid_value"], "objective.avoid_value");
    return o;
}

json objective_json(const Objective& o) {
    json j{{"kind", to_string(o.kind)}, {"direction", to_string(o.direction)}};
    if (o.discount) j["discount"] = *o.discount;
    if (o.horizon) j["horizon"] = *o.horizon;
    if (!o.targets.empty()) j["targets"] = o.targets;
    if (!o.avoid.empty()) {
        j["avoid"] = o.avoid;
        j["avoid_value"] = o.avoid_value;
    }
    return j;
}

DependencyFunction parse_dependency(const json& j, std::size_t states, std::size_t actions, std::size_t factors,
                                    std::size_t declared_ids) {
    if (j.is_object()) {
        BenchmarkSpec spec;
        spec.domain = as<std::string>(field(j, "domain", "dependency"), "dependency.domain");
        if (j.contains("params")) spec.params = as<std::map<std::string, double>>(j["params"], "dependency.params");
        auto dep = generate_benchmark(spec).structure.dependency;
        if (dep.state_count() != states || dep.action_count() != actions || dep.factor_count() != factors)
            fail(fmt::format("dependency generator '{}' does not match the declared factors and actions", spec.domain));
        return dep;
    }
    if (!j.is_array()) fail("dependency: expected a list or a generator object");
    std::size_t ids = declared_ids;
    for (const auto& e : j) ids = std::max(ids, as_index(field(e, "id", "dependency entry"), "dependency.id") + 1);
    DependencyFunction dep(states, actions, factors, ids);
    for (const auto& e : j) {
        const auto s = as_index(field(e, "state", "dependency entry"), "dependency.state");
        const auto a = as_index(field(e, "action", "dependency entry"), "dependency.action");
        const auto i = as_index(field(e, "factor", "dependency entry"), "dependency.factor");
        if (s >= states || a >= actions || i >= factors)
            throw Error(ErrorKind::range, fmt::format("dependency entry ({}, {}, {}) outside the model", s, a, i));
        dep.set(s, a, i, static_cast<Identifier>(as_index(e["id"], "dependency.id")));
    }
    return dep;
}

MarginalSet parse_set(const json& j) {
    const auto kind = as<std::string>(field(j, "kind", "uncertainty entry"), "uncertainty.kind");
    if (kind == "box")
        return BoxSet{as<std::vector<double>>(field(j, "lower", "box"), "box.lower"),
                      as<std::vector<double>>(field(j, "upper", "box"), "box.upper")};
    if (kind == "l1") {
        L1Set s;
        s.nominal = as<std::vector<double>>(field(j, "nominal", "l1"), "l1.nominal");
        s.radius = as<double>(field(j, "radius", "l1"), "l1.radius");
        if (j.contains("norm_p")) s.norm_p = as<double>(j["norm_p"], "l1.norm_p");
        if (j.contains("support"))
            for (const auto& b : j["support"]) s.support.push_back(as<bool>(b, "l1.support") ? 1 : 0);
        return s;
    }
    if (kind == "vertices")
        return VertexPolytope{as<std::vector<std::vector<double>>>(field(j, "vertices", "polytope"), "vertices")};
    fail(fmt::format("unknown uncertainty kind '{}'", kind));
}

json set_json(const MarginalSet& set) {
    if (const auto* b = std::get_if<BoxSet>(&set)) return {{"kind", "box"}, {"lower", b->lower}, {"upper", b->upper}};
    if (const auto* l = std::get_if<L1Set>(&set)) {
        json j{{"kind", "l1"}, {"nominal", l->nominal}, {"radius", l->radius}, {"norm_p", l->norm_p}};
        if (!l->support.empty()) {
            std::vector<bool> mask;
            for (char c : l->support) mask.push_back(c != 0);
            j["support"] = mask;
        }
        return j;
    }
    return {{"kind", "vertices"}, {"vertices", std::get<VertexPolytope>(set).vertices}};
}

json structure_json(const ModelStructure& st) {
    json j;
    j["factors"] = json::array();
    for (const auto& f : st.factors) j["factors"].push_back({{"name", f.name}, {"domain_size", f.domain_size}});
    j["actions"] = st.actions;
    json dep = json::array();
    for (StateIndex s = 0; s < st.state_count(); ++s)
        for (ActionIndex a = 0; a < st.action_count(); ++a)
            for (std::size_t i = 0; i < st.factors.size(); ++i)
                dep.push_back({{"state", s}, {"action", a}, {"factor", i}, {"id", st.dependency(s, a, i)}});
    j["dependency"] = std::move(dep);
    j["identifiers"] = st.dependency.identifier_count();
    json rewards = json::array();
    for (StateIndex s = 0; s < st.state_count(); ++s) {
        json row = json::array();
        for (ActionIndex a = 0; a < st.action_count(); ++a) row.push_back(st.reward(s, a));
        rewards.push_back(std::move(row));
    }
    j["rewards"] = std::move(rewards);
    j["initial_state"] = st.initial_state;
    j["objective"] = objective_json(st.objective);
    if (!st.metadata.empty()) j["metadata"] = st.metadata;
    return j;
}

json marginals_json(const MarginalTable& m) {
    json out = json::array();
    for (std::size_t i = 0; i < m.factor_count(); ++i)
        for (Identifier id = 0; id < m.identifier_count(); ++id)
            if (m.has(i, id)) {
                const auto row = m.row(i, id);
                out.push_back({{"factor", i}, {"id", id}, {"probs", std::vector<double>(row.begin(), row.end())}});
            }
    return out;
}

} // namespace

FactoredMdp ModelFile::nominal() const {
    if (!marginals) throw Error(ErrorKind::config, "the model file has no nominal marginals");
    return {structure, *marginals};
}

RfMdp ModelFile::robust() const {
    if (!uncertainty) throw Error(ErrorKind::config, "the model file has no uncertainty sets");
    return {structure, *uncertainty};
}

ModelFile parse_model(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(fmt::format("malformed model file: {}", e.what()));
    }

    ModelFile out;
    auto& st = out.structure;
    const auto& factors = field(j, "factors", "model");
    if (!factors.is_array() || factors.empty()) fail("factors: expected a non-empty list");
    for (const auto& f : factors)
        st.factors.push_back({as<std::string>(field(f, "name", "factor"), "factor.name"),
                              as_index(field(f, "domain_size", "factor"), "factor.domain_size")});
    st.actions = as<std::vector<std::string>>(field(j, "actions", "model"), "actions");
    std::size_t states = 1;
    for (const auto& f : st.factors) {
        if (f.domain_size == 0) fail(fmt::format("factor '{}' has an empty domain", f.name));
        states *= f.domain_size;
    }
    const std::size_t actions = st.actions.size();
    // Identifiers may outnumber those the dependency uses; "identifiers" keeps the unused ones addressable.
    const std::size_t declared_ids = j.contains("identifiers") ? as_index(j["identifiers"], "identifiers") : 0;
    st.dependency =
        parse_dependency(field(j, "dependency", "model"), states, actions, st.factors.size(), declared_ids);

    const auto& rewards = field(j, "rewards", "model");
    if (!rewards.is_array() || rewards.size() != states)
        fail(fmt::format("rewards: expected {} rows of {} values", states, actions));
    for (const auto& row : rewards) {
        const auto values = as<std::vector<double>>(row, "rewards");
        if (values.size() != actions) fail(fmt::format("rewards: expected {} values per state", actions));
        st.rewards.insert(st.rewards.end(), values.begin(), values.end());
    }
    st.initial_state = j.contains("initial_state") ? as_index(j["initial_state"], "initial_state") : 0;
    st.objective = parse_objective(field(j, "objective", "model"));
    if (j.contains("metadata"))
        for (const auto& [k, v] : j["metadata"].items()) st.metadata[k] = v.is_string() ? v.get<std::string>() : v.dump();

    const std::size_t ids = st.dependency.identifier_count();
    auto check_key = [&](std::size_t i, std::size_t id, std::string_view what) {
        if (i >= st.factors.size() || id >= ids)
            throw Error(ErrorKind::range, fmt::format("{} entry ({}, {}) outside the model", what, i, id));
    };
    if (j.contains("marginals")) {
        MarginalTable m(st.factors.size(), ids);
        for (const auto& e : j["marginals"]) {
            const auto i = as_index(field(e, "factor", "marginal"), "marginal.factor");
            const auto id = as_index(field(e, "id", "marginal"), "marginal.id");
            check_key(i, id, "marginal");
            m.set(i, static_cast<Identifier>(id), as<std::vector<double>>(field(e, "probs", "marginal"), "probs"));
        }
        out.marginals = std::move(m);
    }
    if (j.contains("uncertainty")) {
        UncertaintyTable u(st.factors.size(), ids);
        for (const auto& e : j["uncertainty"]) {
            const auto i = as_index(field(e, "factor", "uncertainty entry"), "uncertainty.factor");
            const auto id = as_index(field(e, "id", "uncertainty entry"), "uncertainty.id");
            check_key(i, id, "uncertainty");
            u.set(i, static_cast<Identifier>(id), parse_set(e));
        }
        out.uncertainty = std::move(u);
    }
    if (!out.marginals && !out.uncertainty) fail("model file has neither 'marginals' nor 'uncertainty'");

    if (auto report = validate_structure(st); !report.empty())
        throw Error(ErrorKind::validation, fmt::format("{}: {}", report.front().field, report.front().message));
    if (out.marginals) require_valid(out.nominal());
    if (out.uncertainty) require_valid(out.robust());
    return out;
}

ModelFile read_model(const std::filesystem::path& path) { return parse_model(read_text(path)); }

std::string serialize_model(const FactoredMdp& model) {
    auto j = structure_json(model.structure);
    j["marginals"] = marginals_json(model.marginals);
    return j.dump(1) + "\n";
}

std::string serialize_model(const RfMdp& model, const MarginalTable* nominal) {
    auto j = structure_json(model.structure);
    if (nominal != nullptr) j["marginals"] = marginals_json(*nominal);
    json sets = json::array();
    const auto& u = model.uncertainty;
    for (std::size_t i = 0; i < u.factor_count(); ++i)
        for (Identifier id = 0; id < u.identifier_count(); ++id)
            if (u.has(i, id)) {
                auto e = set_json(u.get(i, id));
                e["factor"] = i;
                e["id"] = id;
                sets.push_back(std::move(e));
            }
    j["uncertainty"] = std::move(sets);
    return j.dump(1) + "\n";
}

std::string serialize_solution(const RobustSolution& solution) {
    json j{{"values", solution.values},
           {"policy", solution.full_policy.stage_count() > 1 ? json(solution.full_policy.stages) : json(solution.policy)},
           {"method", solution.method},
           {"iterations", solution.iterations},
           {"residual", solution.residual}};
    return j.dump(1) + "\n";
}

std::string format_number(double value) { return fmt::format("{:.12g}", value); }

std::string trace_csv(const LearningTrace& trace) {
    std::string out(trace_header);
    out += '\n';
    for (const auto& c : trace.checkpoints)
        out += fmt::format("{},{},{},{},,{}\n", c.trajectories, format_number(c.guarantee), format_number(c.nominal),
                           c.recomputes, trace.seed);
    return out;
}

void write_text(const std::filesystem::path& path, std::string_view text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream f(path, std::ios::binary);
    f << text;
    if (!f) throw Error(ErrorKind::config, fmt::format("cannot write '{}'", path.string()));
}

std::string read_text(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw Error(ErrorKind::parse, fmt::format("cannot read '{}'", path.string()));
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

} // namespace rfmdp
