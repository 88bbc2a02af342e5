#ifndef HCR_PORTFOLIO_HPP
#define HCR_PORTFOLIO_HPP

#include <stdexcept>
#include <string>
#include <vector>

namespace hcr {

// One observed cell: claims produced by a portfolio slice in one month.
struct PortfolioRecord {
  int service = 0;      // service type id
  int age_class = 0;    // 1..n_classes
  int month = 0;        // 1..n_months
  long n_claims = 0;    // observed number of claims
  double claim_total = 0.0;  // total claim value for the cell
  long population = 0;  // insured population exposed in the cell
};

class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Validated monthly claim panel. Invariants enforced at construction:
// claim_total == 0 exactly when n_claims == 0, populations >= 1, no
// duplicate (service, age_class, month) keys, and a dense (age, month)
// grid within every service.
class PortfolioData {
 public:
  PortfolioData() = default;
  explicit PortfolioData(std::vector<PortfolioRecord> records);

  const std::vector<PortfolioRecord>& records() const { return records_; }
  int n_classes() const { return n_classes_; }
  int n_months() const { return n_months_; }
  const std::vector<int>& services() const { return services_; }

  // Records of a single service, as its own validated panel.
  PortfolioData slice_service(int service) const;

 private:
  std::vector<PortfolioRecord> records_;
  int n_classes_ = 0;
  int n_months_ = 0;
  std::vector<int> services_;
};

}  // namespace hcr

#endif
