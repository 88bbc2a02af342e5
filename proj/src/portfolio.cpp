#include "hcr/portfolio.hpp"

#include <algorithm>
#include <map>
#include <set>

namespace hcr {

PortfolioData::PortfolioData(std::vector<PortfolioRecord> records)
    : records_(std::move(records)) {
  if (records_.empty()) return;

  std::set<std::tuple<int, int, int>> keys;
  std::set<int> services;
  for (const auto& r : records_) {
    if (r.age_class < 1) throw DataError("age_class must be >= 1");
    if (r.month < 1) throw DataError("month must be >= 1");
    if (r.n_claims < 0) throw DataError("n_claims must be nonnegative");
    if (r.claim_total < 0.0) throw DataError("claim_total must be nonnegative");
    if (r.population < 1) throw DataError("population must be >= 1");
    if ((r.n_claims == 0) != (r.claim_total == 0.0))
      throw DataError("claim_total must be zero exactly when n_claims is zero");
    if (!keys.insert({r.service, r.age_class, r.month}).second)
      throw DataError("duplicate (service, age_class, month) key");
    services.insert(r.service);
    n_classes_ = std::max(n_classes_, r.age_class);
    n_months_ = std::max(n_months_, r.month);
  }
  services_.assign(services.begin(), services.end());

  // Dense grid: every (age, month) pair present within each service.
  const std::size_t per_service =
      static_cast<std::size_t>(n_classes_) * static_cast<std::size_t>(n_months_);
  std::map<int, std::size_t> count;
  for (const auto& r : records_) ++count[r.service];
  for (const auto& [svc, n] : count)
    if (n != per_service)
      throw DataError("sparse (age_class, month) grid for service " +
                      std::to_string(svc));
}

PortfolioData PortfolioData::slice_service(int service) const {
  std::vector<PortfolioRecord> out;
  for (const auto& r : records_)
    if (r.service == service) out.push_back(r);
  if (out.empty())
    throw DataError("no records for service " + std::to_string(service));
  return PortfolioData(std::move(out));
}

}  // namespace hcr
