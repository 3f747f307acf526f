#pragma once

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "obsepi/common.hpp"
#include "obsepi/energy.hpp"
#include "obsepi/epiperimetric.hpp"
#include "obsepi/fb_analysis.hpp"
#include "obsepi/quadrature.hpp"
#include "obsepi/sphere_basis.hpp"

namespace obsepi {

using nlohmann::json;

// Fixed formatting so repeated runs are byte-identical.
inline std::string num(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

// FNV-1a of the canonical config text.
inline std::string config_hash(const std::string& canonical) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : canonical) {
        h ^= c;
        h *= 1099511628211ull;
    }
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

// Write-then-rename so output files appear atomically.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    std::filesystem::path p(path);
    if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        require(out.good(), "write_file_atomic: cannot open " + tmp);
        out << content;
    }
    std::filesystem::rename(tmp, p);
}

// ------------------------------ JSON views ---------------------------------

inline json domain_json(const SphericalDomain& dom) {
    json j;
    j["kind"] = dom.kind == DomainKind::FullSphere ? "FullSphere"
                : dom.kind == DomainKind::HalfSphere ? "HalfSphere" : "Cap";
    j["dimension"] = dom.dim;
    if (dom.kind == DomainKind::Cap) j["cap_delta"] = dom.cap_delta;
    return j;
}

inline json quadrature_json(const Quadrature& q) {
    json j;
    j["domain"] = domain_json(q.domain);
    j["exactness_degree"] = q.exactness_degree;
    json nodes = json::array(), weights = json::array();
    for (std::size_t i = 0; i < q.size(); ++i) {
        nodes.push_back({q.nodes[i][0], q.nodes[i][1], q.nodes[i][2]});
        weights.push_back(q.weights[i]);
    }
    j["nodes"] = nodes;
    j["weights"] = weights;
    return j;
}

inline json basis_json(const SpectralBasis& b) {
    json j;
    j["domain"] = domain_json(b.domain);
    json modes = json::array();
    for (const Mode& m : b.modes) modes.push_back({{"lambda", m.lambda}, {"alpha", m.alpha}});
    j["modes"] = modes;
    j["nodes"] = quadrature_json(*b.quadrature)["nodes"];
    j["weights"] = quadrature_json(*b.quadrature)["weights"];
    return j;
}

inline json energy_json(const EnergyReport& r, json metadata = {}) {
    json j;
    j["W0"] = r.W0;
    j["W_tilde"] = r.W_tilde;
    j["W"] = r.W;
    j["dirichlet_bulk"] = r.dirichlet_bulk;
    j["boundary_l2"] = r.boundary_l2;
    j["positive_mass"] = r.positive_mass;
    if (!metadata.is_null() && !metadata.empty()) j["input"] = metadata;
    return j;
}

inline json decomposition_json(const SingularDecomposition& dec) {
    json j;
    j["nu"] = {dec.nu.nu[0], dec.nu.nu[1], dec.nu.nu[2]};
    json A = json::array();
    for (int i = 0; i < dec.A.A.rows(); ++i) {
        json row = json::array();
        for (int k = 0; k < dec.A.A.cols(); ++k) row.push_back(dec.A.A(i, k));
        A.push_back(row);
    }
    j["A"] = A;
    json lam = json::array(), coef = json::array();
    for (int i = 0; i < dec.phi_coefficients.size(); ++i) {
        if (dec.phi_coefficients[i] == 0.0) continue;
        lam.push_back(dec.phi_lambdas[i]);
        coef.push_back(dec.phi_coefficients[i]);
    }
    j["phi"] = {{"lambdas", lam}, {"coeffs", coef}};
    j["residual"] = dec.residual;
    return j;
}

// ------------------------------ CSV tables ---------------------------------

inline std::string suite_csv(const SuiteResult& res, const std::string& hash) {
    std::ostringstream out;
    out << "family,d,trace_id,W_z,W_h,gain,required_gain,empirical_eps,satisfied,"
           "dist_K,final_ratio,min_h,error,config\n";
    for (const SuiteRow& r : res.rows) {
        out << r.family << ',' << r.d << ',' << r.trace_id << ',' << num(r.W_z) << ','
            << num(r.W_h) << ',' << num(r.gain) << ',' << num(r.required_gain) << ','
            << num(r.empirical_eps) << ',' << (r.satisfied ? 1 : 0) << ',' << num(r.dist_K) << ','
            << num(r.final_ratio) << ',' << num(r.min_h) << ',' << r.error << ',' << hash << '\n';
    }
    return out.str();
}

inline json suite_summary(const SuiteResult& res) {
    json j;
    j["rows"] = res.rows.size();
    j["violations"] = res.violations;
    j["all_satisfied"] = res.all_satisfied;
    json inf = json::object();
    for (const auto& [fam, eps] : res.family_eps_infimum) inf[fam] = eps;
    j["family_eps_infimum"] = inf;
    return j;
}

inline std::string sharpness_csv(const SharpnessTable& t, const std::string& hash) {
    std::ostringstream out;
    out << "eps,R_l2,gradR_l2,measure,c0,c2_abs,grad_phi_l2,dist_K,ratio_49,"
           "log10_eps,log10_R,log10_gradR,log10_measure,log10_dist,config\n";
    for (const SharpnessRow& r : t.rows) {
        out << num(r.eps) << ',' << num(r.R_l2) << ',' << num(r.gradR_l2) << ','
            << num(r.measure) << ',' << num(r.c0) << ',' << num(r.c2_abs) << ','
            << num(r.grad_phi_l2) << ',' << num(r.dist_K) << ',' << num(r.ratio_49) << ','
            << num(std::log10(r.eps)) << ',' << num(std::log10(r.R_l2)) << ','
            << num(std::log10(r.gradR_l2)) << ',' << num(std::log10(r.measure)) << ','
            << num(std::log10(r.dist_K)) << ',' << hash << '\n';
    }
    return out.str();
}

inline std::string decay_csv(const DecaySeries& s, const std::string& hash) {
    std::ostringstream out;
    out << "r,e,f,log10_r,log10_e,config\n";
    for (std::size_t i = 0; i < s.r.size(); ++i)
        out << num(s.r[i]) << ',' << num(s.e[i]) << ',' << num(s.f[i]) << ','
            << num(std::log10(s.r[i])) << ','
            << num(s.e[i] > 0 ? std::log10(s.e[i]) : -18.0) << ',' << hash << '\n';
    return out.str();
}

inline std::string classification_csv(const std::vector<PointClassification>& pts,
                                      const std::string& hash) {
    std::ostringstream out;
    out << "x0,x1,x2,density,kind,stratum,blowup,fit_residual,config\n";
    for (const auto& p : pts) {
        out << num(p.point[0]) << ',' << num(p.point[1]) << ',' << num(p.point[2]) << ','
            << num(p.density) << ',' << to_string(p.kind) << ',' << p.stratum << ',';
        std::ostringstream bl;
        if (p.kind == PointKind::Regular)
            bl << "nu=(" << num(p.nu.nu[0]) << ";" << num(p.nu.nu[1]) << ";" << num(p.nu.nu[2])
               << ")";
        else if (p.kind == PointKind::Singular) {
            bl << "A=(";
            for (int i = 0; i < p.A.A.rows(); ++i)
                for (int j = 0; j < p.A.A.cols(); ++j)
                    bl << num(p.A.A(i, j)) << ((i == p.A.A.rows() - 1 && j == p.A.A.cols() - 1) ? "" : ";");
            bl << ")";
        }
        out << bl.str() << ',' << num(p.fit_residual) << ',' << hash << '\n';
    }
    return out.str();
}

inline std::string free_boundary_csv(const std::vector<Vec>& pts, const std::string& hash) {
    std::ostringstream out;
    out << "x0,x1,x2,config\n";
    for (const Vec& p : pts)
        out << num(p[0]) << ',' << num(p[1]) << ',' << num(p[2]) << ',' << hash << '\n';
    return out.str();
}

}  // namespace obsepi
