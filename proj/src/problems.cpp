#include "vcnf/problems.hpp"

namespace vcnf {

double potential_eval(const Potential& V, std::span<const double> x) { return potential_eval<double>(V, x); }

std::vector<double> drift_eval(const DriftField& b, std::span<const double> x) { return drift_eval<double>(b, x); }

double ProblemSpec::horizon() const {
  if (ot()) return 1.0;
  if (const auto* r = rwpo()) return r->horizon;
  return fp()->horizon;
}

const Distribution& ProblemSpec::initial() const {
  if (const auto* o = ot()) return o->p0;
  if (const auto* r = rwpo()) return r->p0;
  return fp()->p0;
}

int ProblemSpec::dim() const { return initial().dim(); }

std::string ProblemSpec::kind() const {
  if (ot()) return "ot";
  if (rwpo()) return "rwpo";
  return "fp";
}

void ProblemSpec::validate() const {
  if (const auto* o = ot()) {
    if (o->p0.dim() != o->p1.dim()) throw ConfigError("ot: p0 and p1 dimensions differ");
    return;
  }
  if (const auto* r = rwpo()) {
    if (!(r->beta > 0.0)) throw ConfigError("rwpo: beta must be positive");
    if (!(r->horizon > 0.0)) throw ConfigError("rwpo: horizon must be positive");
    if (std::holds_alternative<DoubleWellPotential>(r->potential) && r->p0.dim() != 2)
      throw ConfigError("rwpo: double-well potential requires d = 2");
    return;
  }
  const auto* f = fp();
  if (!(f->gamma > 0.0)) throw ConfigError("fp: gamma must be positive");
  if (!(f->horizon > 0.0)) throw ConfigError("fp: horizon must be positive");
  if (const auto* ou = std::get_if<OUDrift>(&f->drift); ou && !(ou->a > 0.0))
    throw ConfigError("fp: OU rate must be positive");
  if (std::holds_alternative<SmilingDrift>(f->drift) && f->p0.dim() != 2)
    throw ConfigError("fp: smiling drift requires d = 2");
}

}  // namespace vcnf
