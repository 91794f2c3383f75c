#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

namespace nef {

// An evaluable reduction function phi with E[phi(X_theta)] = Var[X_theta]
// across the family. Provenance is kept so reports can say how a value was
// produced.
struct ReductionFunction {
    enum class Kind { ClosedForm, AtomTable, DensityGrid };

    Kind kind = Kind::ClosedForm;
    std::function<double(double)> eval;
    std::string support;

    // atom-table case: phi(n) = table[n]; entries with defined[n] == false
    // carry no basis mass and must not be evaluated
    std::vector<double> table;
    std::vector<bool> defined;

    static ReductionFunction closed_form(std::function<double(double)> f, std::string support) {
        ReductionFunction r;
        r.kind = Kind::ClosedForm;
        r.eval = std::move(f);
        r.support = std::move(support);
        return r;
    }

    static ReductionFunction atom_table(std::vector<double> values, std::vector<bool> present) {
        ReductionFunction r;
        r.kind = Kind::AtomTable;
        r.table = std::move(values);
        r.defined = std::move(present);
        r.support = "atoms on {0,1,...," + std::to_string(r.table.size() - 1) + "}";
        auto tab = r.table;
        auto def = r.defined;
        r.eval = [tab, def](double x) {
            auto n = static_cast<std::size_t>(std::llround(x));
            if (n >= tab.size() || !def[n]) return 0.0;
            return tab[n];
        };
        return r;
    }

    static ReductionFunction density_grid(std::vector<double> xs, std::vector<double> values,
                                          std::string support) {
        ReductionFunction r;
        r.kind = Kind::DensityGrid;
        r.support = std::move(support);
        r.eval = [xs = std::move(xs), values = std::move(values)](double x) {
            if (xs.empty()) return 0.0;
            if (x <= xs.front()) return values.front();
            if (x >= xs.back()) return values.back();
            auto it = std::lower_bound(xs.begin(), xs.end(), x);
            std::size_t i = static_cast<std::size_t>(it - xs.begin());
            double t = (x - xs[i - 1]) / (xs[i] - xs[i - 1]);
            return (1.0 - t) * values[i - 1] + t * values[i];
        };
        return r;
    }
};

}  // namespace nef
