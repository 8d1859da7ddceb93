#pragma once

#include "chb/params.hpp"

#define TOML_EXCEPTIONS 1
#include <toml.hpp>

#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <string_view>

namespace chb {

namespace detail {

inline double toml_number(const toml::node& n, const std::string& key) {
    if (auto v = n.value<double>()) return *v;
    throw ConfigError("'" + key + "' must be a number");
}

inline std::size_t toml_count(const toml::node& n, const std::string& key) {
    const auto v = n.value<std::int64_t>();
    if (!v || *v < 0) throw ConfigError("'" + key + "' must be a non-negative integer");
    return static_cast<std::size_t>(*v);
}

inline std::string toml_string(const toml::node& n, const std::string& key) {
    if (auto v = n.value<std::string>()) return *v;
    throw ConfigError("'" + key + "' must be a string");
}

inline Side parse_side(const std::string& s) {
    for (Side side : {Side::Left, Side::Right, Side::Bottom, Side::Top})
        if (s == side_name(side)) return side;
    throw ConfigError("unknown boundary side '" + s + "' (expected left, right, bottom or top)");
}

inline MobilityKind::Law parse_mobility(const std::string& s) {
    for (auto law : {MobilityKind::Law::Constant, MobilityKind::Law::ScaledConstant,
                     MobilityKind::Law::OneSidedDegenerate})
        if (s == mobility_name(law)) return law;
    throw ConfigError("unknown mobility '" + s + "' (expected constant, scaled or degenerate)");
}

using KeyHandler = std::function<void(const toml::node&, const std::string&)>;

} // namespace detail

/// Parameters from TOML text. Sections [physics], [numerics], [mesh] and
/// [output] take keys named like the Parameters fields; anything else is an
/// error. Unset keys keep their defaults.
///
///   [physics]  mobility = "constant" | "scaled" | "degenerate", mobility_m0,
///              profile = "disk" | "r" | "r1" .. "r4"
///   [mesh]     no_slip = ["left", "bottom", ...]   (other sides stress-free)
inline Parameters parse_config(std::string_view text, const std::string& source = "<config>") {
    toml::table root;
    try {
        root = toml::parse(text, source);
    } catch (const toml::parse_error& e) {
        std::ostringstream os;
        os << source << ':' << e.source().begin.line << ':' << e.source().begin.column << ": " << e.description();
        throw ConfigError(os.str());
    }
    Parameters p;
    using detail::toml_count;
    using detail::toml_number;
    const auto num = [](double& field) {
        return detail::KeyHandler([&field](const toml::node& n, const std::string& k) { field = toml_number(n, k); });
    };
    const auto cnt = [](std::size_t& field) {
        return detail::KeyHandler([&field](const toml::node& n, const std::string& k) { field = toml_count(n, k); });
    };
    const std::map<std::string, std::map<std::string, detail::KeyHandler>> schema{
        {"physics",
         {{"epsilon", num(p.epsilon)},
          {"beta", num(p.beta)},
          {"chi_phi", num(p.chi_phi)},
          {"chi", num(p.chi)},
          {"D", num(p.D)},
          {"P", num(p.P)},
          {"A", num(p.A)},
          {"C", num(p.C)},
          {"alpha", num(p.alpha)},
          {"rho_S", num(p.rho_S)},
          {"nu", num(p.nu)},
          {"eta_minus", num(p.eta_minus)},
          {"eta_plus", num(p.eta_plus)},
          {"lambda_bulk", num(p.lambda_bulk)},
          {"sigma_B", num(p.sigma_B)},
          {"radius", num(p.radius)},
          {"mobility_m0", num(p.mobility.m0)},
          {"mobility",
           [&p](const toml::node& n, const std::string& k) {
               p.mobility.law = detail::parse_mobility(detail::toml_string(n, k));
           }},
          {"profile",
           [&p](const toml::node& n, const std::string& k) { p.profile = parse_profile(detail::toml_string(n, k)); }}}},
        {"numerics",
         {{"dt", num(p.dt)},
          {"t_end", num(p.t_end)},
          {"vi_tol", num(p.vi_tol)},
          {"vi_maxit", cnt(p.vi_maxit)},
          {"gmres_tol", num(p.gmres_tol)},
          {"gmres_restart", cnt(p.gmres_restart)},
          {"gmres_maxit", cnt(p.gmres_maxit)},
          {"cg_tol", num(p.cg_tol)},
          {"radial_dt", num(p.radial_dt)},
          {"radial_grid", cnt(p.radial_grid)},
          {"radial_domain", num(p.radial_domain)}}},
        {"mesh",
         {{"mesh_n", cnt(p.mesh_n)},
          {"refine_levels", cnt(p.refine_levels)},
          {"no_slip",
           [&p](const toml::node& n, const std::string& k) {
               const auto* arr = n.as_array();
               if (!arr) throw ConfigError("'" + k + "' must be an array of side names");
               p.bc = BoundarySpec{};
               for (const auto& e : *arr) p.bc[detail::parse_side(detail::toml_string(e, k))] = BoundaryTag::NoSlip;
           }}}},
        {"output", {{"output_every", cnt(p.output_every)}, {"radius_samples", cnt(p.radius_samples)}}},
    };

    for (const auto& [section, node] : root) {
        const std::string sname(section.str());
        const auto sit = schema.find(sname);
        if (sit == schema.end()) throw ConfigError(source + ": unknown section [" + sname + "]");
        const auto* table = node.as_table();
        if (!table) throw ConfigError(source + ": '" + sname + "' must be a section");
        for (const auto& [key, value] : *table) {
            const std::string kname(key.str());
            const auto kit = sit->second.find(kname);
            if (kit == sit->second.end()) throw ConfigError(source + ": unknown key '" + kname + "' in [" + sname + "]");
            kit->second(value, sname + "." + kname);
        }
    }
    return p;
}

inline Parameters load_config(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot read config file '" + path.string() + "'");
    std::ostringstream text;
    text << in.rdbuf();
    return parse_config(text.str(), path.string());
}

} // namespace chb
