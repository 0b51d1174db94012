#include <string>
#include <vector>

#include "doctest.h"
#include "property_checks.hpp"

namespace {

void expect_clean(const std::vector<std::string>& failures) {
    for (const auto& failure : failures) {
        FAIL_CHECK(failure);
    }
    CHECK(failures.empty());
}

}  // namespace

TEST_CASE("class probability matrices are row-stochastic") {
    expect_clean(props::check_cpm_rows_stochastic(40));
}

TEST_CASE("partitioning conserves the dataset and honours victim lists") {
    expect_clean(props::check_partition_conserves(40));
}

TEST_CASE("synthetic oversamples sit on segments between class members") {
    expect_clean(props::check_smote_geometry(40));
}

TEST_CASE("aggregation is equivariant under upload permutations") {
    expect_clean(props::check_fedmade_permutation_equivariance(25));
}

TEST_CASE("configs are stable under serialize-parse-serialize") {
    expect_clean(props::check_config_round_trip());
}

TEST_CASE("identical runs emit byte-identical report bundles") {
    expect_clean(props::check_report_determinism());
}
