#pragma once

#include <algorithm>
#include <cctype>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "obsepi/common.hpp"

namespace obsepi {

// Plain-text run configuration: `key = value` lines, `#` comments. Keys used
// by the CLI:
//   dim        2 or 3 (0 = both for verify-epi)
//   resolution grid nodes per side (solve) / quadrature resolution
//   modes      spectral band limit (0 = dimension default)
//   eps        inequality constant for the singular suite
//   traces     sampled traces per dimension and suite
//   seed       RNG seed for the sampled families
//   out        output directory
//   data       boundary datum for solve: qnu | qa | qa_kernel
//   delta0     flat-point cap opening
//   weight     0: q = 1; w > 0: q(x) = 1 + w |x|^{1/2}
//   eps_list   comma-separated sharpness eps values
struct RunConfig {
    std::map<std::string, std::string> kv;

    static RunConfig from_file(const std::string& path) {
        std::ifstream in(path);
        require(in.good(), "config: cannot open " + path);
        RunConfig cfg;
        std::string line;
        int lineno = 0;
        while (std::getline(in, line)) {
            ++lineno;
            std::string s = line.substr(0, line.find('#'));
            auto notspace = [](unsigned char c) { return !std::isspace(c); };
            s.erase(s.begin(), std::find_if(s.begin(), s.end(), notspace));
            s.erase(std::find_if(s.rbegin(), s.rend(), notspace).base(), s.end());
            if (s.empty()) continue;
            auto eq = s.find('=');
            require(eq != std::string::npos,
                    "config: expected key = value at line " + std::to_string(lineno));
            std::string key = s.substr(0, eq), val = s.substr(eq + 1);
            key.erase(std::find_if(key.rbegin(), key.rend(), notspace).base(), key.end());
            val.erase(val.begin(), std::find_if(val.begin(), val.end(), notspace));
            require(!key.empty(), "config: empty key at line " + std::to_string(lineno));
            cfg.kv[key] = val;
        }
        return cfg;
    }

    bool has(const std::string& k) const { return kv.count(k) > 0; }
    std::string str(const std::string& k, const std::string& dflt = "") const {
        auto it = kv.find(k);
        return it == kv.end() ? dflt : it->second;
    }
    int integer(const std::string& k, int dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        try {
            return std::stoi(it->second);
        } catch (...) {
            throw Error("config: key '" + k + "' is not an integer: " + it->second);
        }
    }
    double real(const std::string& k, double dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        try {
            return std::stod(it->second);
        } catch (...) {
            throw Error("config: key '" + k + "' is not a number: " + it->second);
        }
    }
    std::vector<double> reals(const std::string& k, std::vector<double> dflt) const {
        auto it = kv.find(k);
        if (it == kv.end()) return dflt;
        std::vector<double> out;
        std::stringstream ss(it->second);
        std::string tok;
        while (std::getline(ss, tok, ',')) {
            try {
                out.push_back(std::stod(tok));
            } catch (...) {
                throw Error("config: key '" + k + "' has a non-numeric entry: " + tok);
            }
        }
        return out;
    }

    // Canonical serialisation (sorted keys) for hashing and reproducibility.
    std::string canonical() const {
        std::ostringstream out;
        for (const auto& [k, v] : kv) out << k << " = " << v << "\n";
        return out.str();
    }
};

}  // namespace obsepi
