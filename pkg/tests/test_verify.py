import pytest

from opeval import verify
from opeval.analytics import VarianceTerms, compute_v1_v2
from opeval.core import InputError


def test_fresh_checkout_all_pass():
    report = verify.run_verify()
    assert report.all_passed
    assert {r.name for r in report.results} == set(verify.suite_names())
    assert all(r.status == "pass" for r in report.results)


def test_selected_suites_report_others_skipped():
    report = verify.run_verify(suites=["fisher-identity"])
    by_name = {r.name: r.status for r in report.results}
    assert by_name["fisher-identity"] == "pass"
    skipped = [name for name, status in by_name.items() if status == "skipped"]
    assert len(skipped) == len(verify.suite_names()) - 1
    assert len(report.results) == len(verify.suite_names())


def test_unknown_suite():
    with pytest.raises(InputError):
        verify.run_verify(suites=["nope"])


def test_perturbed_variance_formula_is_caught():
    def corrupted(instance):
        terms = compute_v1_v2(instance)
        return VarianceTerms(v1=terms.v1 + 0.05, v2=terms.v2)

    report = verify.run_verify(suites=["lr-mse-exact"],
                               overrides={"v1v2": corrupted})
    by_name = {r.name: r.status for r in report.results}
    assert by_name["lr-mse-exact"] == "fail"
    assert not report.all_passed


def test_perturbed_bias_formula_is_caught():
    from opeval.analytics import reg_bias

    report = verify.run_verify(
        suites=["reg-bias-exact"],
        overrides={"reg_bias": lambda inst, n: reg_bias(inst, n) * 1.01 + 1e-4})
    assert not report.all_passed


def test_report_serializes():
    report = verify.run_verify(suites=["binomial-lower-tail"])
    doc = report.to_dict()
    assert doc["all_passed"]
    assert any(r["name"] == "binomial-lower-tail" and r["status"] == "pass"
               for r in doc["results"])
