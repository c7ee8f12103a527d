#include "cac/policy_io.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace cac {

namespace {

class PolicyFormatError : public std::runtime_error {
public:
    PolicyFormatError(std::size_t line, const std::string& what)
        : std::runtime_error("policy file line " + std::to_string(line) + ": " + what) {}
};

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = s.find(sep, start);
        out.emplace_back(s.substr(start, pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

int parse_int(std::string_view text) {
    int v = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("not an integer: '" + std::string(text) + "'");
    }
    return v;
}

}  // namespace

std::string format_real(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
    if (ec != std::errc{}) throw std::runtime_error("format_real failed");
    return std::string(buf, ptr);
}

double parse_real(std::string_view text) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
    if (ec != std::errc{} || ptr != text.data() + text.size()) {
        throw std::invalid_argument("not a number: '" + std::string(text) + "'");
    }
    return v;
}

void write_policy(std::ostream& out, const Policy& policy) {
    const auto& meta = policy.metadata;
    const auto space = enumerate_states(meta.classes, meta.total_channels);
    if (space.size() != policy.size()) {
        throw ModelError("write_policy: policy does not match its metadata");
    }
    out << "cac-policy v1 K=" << meta.classes.size() << " N=" << meta.total_channels << " b=";
    for (std::size_t i = 0; i < meta.classes.size(); ++i) {
        out << (i ? ";" : "") << meta.classes[i].bandwidth;
    }
    out << " R=";
    for (std::size_t i = 0; i < meta.classes.size(); ++i) {
        const auto& c = meta.classes[i];
        out << (i ? ";" : "") << format_real(c.reward_carry) << ',' << format_real(c.reward_block)
            << ',' << format_real(c.reward_drop);
    }
    out << " c=";
    for (std::size_t i = 0; i < meta.neighbor_calls.size(); ++i) {
        out << (i ? ";" : "") << format_real(meta.neighbor_calls[i]);
    }
    out << " pricing=" << to_string(meta.pricing) << '\n';
    for (std::size_t s = 0; s < space.size(); ++s) {
        for (int x : space[s].occupancy) out << x << ',';
        out << event_code(space[s].event) << ',' << to_string(policy[s]) << '\n';
    }
}

void write_policy(const std::filesystem::path& path, const Policy& policy) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot open " + path.string() + " for writing");
    write_policy(out, policy);
    if (!out) throw std::runtime_error("write failed: " + path.string());
}

Policy read_policy(std::istream& in) {
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line)) throw PolicyFormatError(lineno, "missing header");

    Policy policy;
    auto& meta = policy.metadata;
    std::size_t k = 0;
    try {
        std::istringstream header(line);
        std::string magic, version, field;
        header >> magic >> version;
        if (magic != "cac-policy" || version != "v1") {
            throw std::invalid_argument("not a cac-policy v1 file");
        }
        std::vector<int> bw;
        std::vector<std::string> rewards;
        bool have_pricing = false;
        while (header >> field) {
            const auto eq = field.find('=');
            if (eq == std::string::npos) throw std::invalid_argument("bad field '" + field + "'");
            const auto key = field.substr(0, eq);
            const auto value = std::string_view(field).substr(eq + 1);
            if (key == "K") {
                k = static_cast<std::size_t>(parse_int(value));
            } else if (key == "N") {
                meta.total_channels = parse_int(value);
            } else if (key == "b") {
                for (const auto& v : split(value, ';')) bw.push_back(parse_int(v));
            } else if (key == "R") {
                rewards = split(value, ';');
            } else if (key == "c") {
                for (const auto& v : split(value, ';')) meta.neighbor_calls.push_back(parse_real(v));
            } else if (key == "pricing") {
                if (value == "flat") meta.pricing = PricingScheme::flat;
                else if (value == "linear") meta.pricing = PricingScheme::linear;
                else throw std::invalid_argument("unknown pricing '" + std::string(value) + "'");
                have_pricing = true;
            } else {
                throw std::invalid_argument("unknown field '" + key + "'");
            }
        }
        if (k == 0 || bw.size() != k || rewards.size() != k || meta.neighbor_calls.size() != k ||
            !have_pricing) {
            throw std::invalid_argument("header fields are incomplete or inconsistent with K");
        }
        for (std::size_t i = 0; i < k; ++i) {
            const auto r = split(rewards[i], ',');
            if (r.size() != 3) throw std::invalid_argument("reward triple needs three entries");
            meta.classes.push_back({bw[i], parse_real(r[0]), parse_real(r[1]), parse_real(r[2])});
        }
    } catch (const std::invalid_argument& e) {
        throw PolicyFormatError(lineno, e.what());
    }

    const auto space = enumerate_states(meta.classes, meta.total_channels);
    policy.actions.reserve(space.size());
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto fields = split(line, ',');
        if (fields.size() != k + 2) throw PolicyFormatError(lineno, "expected " + std::to_string(k + 2) + " fields");
        const std::size_t s = policy.actions.size();
        if (s >= space.size()) throw PolicyFormatError(lineno, "more rows than states");
        try {
            Occupancy x(k);
            for (std::size_t i = 0; i < k; ++i) x[i] = parse_int(fields[i]);
            const auto ev = parse_event_code(fields[k]);
            if (x != space[s].occupancy || ev != space[s].event) {
                throw std::invalid_argument("row is out of canonical state order");
            }
        } catch (const std::exception& e) {
            throw PolicyFormatError(lineno, e.what());
        }
        const auto& a = fields[k + 1];
        if (a == "accept") policy.actions.push_back(Action::accept);
        else if (a == "reject") policy.actions.push_back(Action::reject);
        else throw PolicyFormatError(lineno, "unknown action '" + a + "'");
        if (policy.actions.back() == Action::accept && space[s].event.is_arrival() &&
            !space.fits(space[s].occupancy, space[s].event.cls)) {
            throw PolicyFormatError(lineno, "accept is infeasible in this state");
        }
    }
    if (policy.actions.size() != space.size()) {
        throw PolicyFormatError(lineno, "expected " + std::to_string(space.size()) + " rows, got " +
                                            std::to_string(policy.actions.size()));
    }
    return policy;
}

Policy read_policy(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw std::runtime_error("cannot open " + path.string());
    return read_policy(in);
}

}  // namespace cac
