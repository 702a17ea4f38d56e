"""
Contingency-table diagnostics for survey data
=============================================

The statistics layer works on plain count tables.  This walk-through uses
the published cross-tabulations from a 1980s public-health advertising
evaluation: ad exposure by a partner-history grouping, self-reported
behavior change by exposure, and perceived media sensationalism.
"""

from hermfair import (
    ContingencyTable,
    chi2_independence,
    conditional_proportions,
    wilson_interval,
)

# Exposure by group: rows are the two partner-history groups, columns are
# "not exposed" / "exposed" to the campaign.
exposure = ContingencyTable(
    [[883, 219], [1975, 122]],
    row_labels=("any same-sex", "opposite-sex only"),
    col_labels=("not exposed", "exposed"),
)
res = chi2_independence(exposure)
print("exposure by group:")
print(f"  chi2({res.dof}) = {res.statistic:.2f}, p = {res.p_value:.3g}, "
      f"Cramer's V = {res.cramers_v:.3f}")

# Per-group exposure rates with Wilson intervals.
cells = conditional_proportions(exposure, axis="rows")
for label, row in zip(exposure.row_labels, cells):
    exposed = row[1]
    print(f"  {label:<18} exposed: {exposed.point:.3f} "
          f"[{exposed.lo:.3f}, {exposed.hi:.3f}]")

# Behavior change by exposure: a 2x3 table with no clear association.
behavior = ContingencyTable(
    [[50, 43, 32], [12, 15, 7]],
    row_labels=("not exposed", "exposed"),
    col_labels=("no change", "moderate change", "change"),
)
res = chi2_independence(behavior)
print("\nbehavior change by exposure:")
print(f"  chi2({res.dof}) = {res.statistic:.2f}, p = {res.p_value:.3f}, "
      f"Cramer's V = {res.cramers_v:.3f}")

# Sensationalism responses against self-reported worry: 4x2, strongly
# associated.  P-values are also reported in log10 space; survey
# missingness tests can land far below what a double can represent.
sensationalism = ContingencyTable(
    [[136, 66], [133, 185], [107, 179], [230, 280]],
    row_labels=("disagree strongly", "tend to disagree",
                "tend to agree", "agree strongly"),
    col_labels=("worried", "not worried"),
)
res = chi2_independence(sensationalism)
print("\nsensationalism vs worry:")
print(f"  chi2({res.dof}) = {res.statistic:.2f}, p = {res.p_value:.3g} "
      f"(log10 p = {res.log10_p:.2f}), Cramer's V = {res.cramers_v:.3f}")

# A standalone interval: 219 exposed of 1102 in the same-sex group.
ci = wilson_interval(219, 1102, confidence=0.95)
print(f"\nWilson 95% interval for 219/1102: "
      f"{ci.point:.3f} [{ci.lo:.3f}, {ci.hi:.3f}]")
