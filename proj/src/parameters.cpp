#include "lstmcov/parameters.hpp"

#include <algorithm>
#include <charconv>
#include <cstring>
#include <istream>
#include <ostream>

#include "lstmcov/errors.hpp"

namespace lstmcov {

std::size_t ParameterStore::add(std::string name, Tensor value) {
    if (std::find(names_.begin(), names_.end(), name) != names_.end())
        throw ArgumentError("duplicate parameter name '" + name + "'");
    const auto prev = scalar_count();
    grads_.emplace_back(value.shape());
    offsets_.push_back(prev + value.size());
    values_.push_back(std::move(value));
    names_.push_back(std::move(name));
    return values_.size() - 1;
}

std::size_t ParameterStore::index_of(const std::string& name) const {
    const auto it = std::find(names_.begin(), names_.end(), name);
    if (it == names_.end()) throw ArgumentError("unknown parameter '" + name + "'");
    return static_cast<std::size_t>(it - names_.begin());
}

ParameterStore::FlatRef ParameterStore::locate(std::size_t flat) const {
    if (flat >= scalar_count())
        throw ArgumentError("flat index " + std::to_string(flat) + " out of range " + std::to_string(scalar_count()));
    const auto it = std::upper_bound(offsets_.begin(), offsets_.end(), flat);
    const auto p = static_cast<std::size_t>(it - offsets_.begin());
    const auto start = p == 0 ? 0 : offsets_[p - 1];
    return {p, flat - start};
}

double ParameterStore::flat_value(std::size_t flat) const {
    const auto r = locate(flat);
    return values_[r.param][r.offset];
}

void ParameterStore::set_flat_value(std::size_t flat, double v) {
    const auto r = locate(flat);
    values_[r.param][r.offset] = v;
}

double ParameterStore::flat_grad(std::size_t flat) const {
    const auto r = locate(flat);
    return grads_[r.param][r.offset];
}

std::string ParameterStore::flat_name(std::size_t flat) const {
    const auto r = locate(flat);
    return names_[r.param] + "[" + std::to_string(r.offset) + "]";
}

void ParameterStore::zero_grad() {
    for (auto& g : grads_) g.fill(0.0);
}

bool ParameterStore::same_values(const ParameterStore& other) const {
    if (names_ != other.names_) return false;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const auto& a = values_[i];
        const auto& b = other.values_[i];
        if (a.shape() != b.shape()) return false;
        if (std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) != 0) return false;
    }
    return true;
}

std::string format_hex(double v) {
    char buf[64];
    const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::hex);
    (void)ec;
    return std::string(buf, ptr);
}

double parse_hex(const std::string& token) {
    double v = 0.0;
    const char* first = token.data();
    const char* last = first + token.size();
    bool negative = false;
    if (first != last && *first == '-') {
        negative = true;
        ++first;
    }
    const auto [ptr, ec] = std::from_chars(first, last, v, std::chars_format::hex);
    if (ec != std::errc() || ptr != last) throw ParseError("bad hex float '" + token + "'", 0);
    return negative ? -v : v;
}

void ParameterStore::write(std::ostream& out) const {
    out << "params " << values_.size() << '\n';
    for (std::size_t i = 0; i < values_.size(); ++i) {
        const auto& t = values_[i];
        out << "param " << names_[i] << ' ' << t.rank();
        for (auto d : t.shape()) out << ' ' << d;
        out << '\n';
        for (std::size_t j = 0; j < t.size(); ++j) out << (j ? " " : "") << format_hex(t[j]);
        out << '\n';
    }
}

ParameterStore ParameterStore::read(std::istream& in) {
    std::string word;
    std::size_t n = 0;
    if (!(in >> word >> n) || word != "params") throw ParseError("expected 'params <count>'", 0);
    ParameterStore store;
    for (std::size_t i = 0; i < n; ++i) {
        std::string name;
        std::size_t rank = 0;
        if (!(in >> word >> name >> rank) || word != "param") throw ParseError("expected 'param <name> <rank>'", 0);
        Shape shape(rank);
        for (auto& d : shape)
            if (!(in >> d)) throw ParseError("truncated shape for '" + name + "'", 0);
        std::vector<double> values(shape_size(shape));
        for (auto& v : values) {
            if (!(in >> word)) throw ParseError("truncated values for '" + name + "'", 0);
            v = parse_hex(word);
        }
        store.add(name, Tensor(std::move(shape), std::move(values)));
    }
    return store;
}

} // namespace lstmcov
