import dataclasses

import numpy as np
import pytest
import yaml

from dexsim.scheme import (
    LevelScheme,
    QDState,
    SchemeError,
    Transition,
    build_scheme,
    default_paper_scheme,
    default_scheme_config,
    line_emission_rates,
    load_scheme,
    rate_matrix,
    save_scheme,
    scheme_to_config,
    stationary_distribution,
    validate,
)


def test_default_scheme_is_valid(default_scheme):
    assert validate(default_scheme) == []


def test_default_scheme_line_set(default_scheme):
    # the observable lines: exciton, biexciton, both trions, both triplet lines
    sources = {lid.split("->")[0] for lid in default_scheme.line_ids}
    assert {"X0", "XX0", "Xm", "Xp", "XX0_T0", "XX0_T3"} <= sources


def test_default_scheme_quoted_parameters(default_scheme):
    assert default_scheme.fss_bright == pytest.approx(36.0)
    assert default_scheme.fss_dark == pytest.approx(5.0)
    assert default_scheme.reference_energy == pytest.approx(1.3395)
    by_id = {t.line_id: t for t in default_scheme.transitions}
    assert by_id["X0->ground"].rate == pytest.approx(1.0)  # ~1 ns lifetime
    assert by_id["DE->ground"].rate <= 0.001  # ~1 us lifetime
    # triplet anchored at the reference energy
    assert default_scheme.line("XX0_T3->DEs").center == pytest.approx(0.0)


def test_default_scheme_intensity_pattern(default_scheme):
    rates = line_emission_rates(default_scheme)
    assert rates["X0->ground"] / rates["XX0->X0"] == pytest.approx(2.0, rel=1e-9)
    per_component = rates["XX0_T0->X0s"] / 2.0
    assert rates["XX0_T3->DEs"] / per_component == pytest.approx(4.0, rel=1e-9)


def test_build_scheme_negative_rate_names_transition():
    cfg = default_scheme_config()
    cfg["transitions"][2]["rate"] = -1.0
    with pytest.raises(SchemeError, match=r"transitions\[2\]"):
        build_scheme(cfg)


def test_build_scheme_two_grounds_rejected():
    cfg = default_scheme_config()
    cfg["states"].append({"id": "ground2", "kind": "ground"})
    cfg["transitions"].append({"from": "ground2", "to": "X0", "rate": 0.1})
    with pytest.raises(SchemeError, match="ground"):
        build_scheme(cfg)


def test_build_scheme_dangling_reference():
    cfg = default_scheme_config()
    cfg["transitions"][0]["to"] = "nosuch"
    with pytest.raises(SchemeError, match=r"transitions\[0\].to"):
        build_scheme(cfg)


def test_build_scheme_radiative_needs_energy():
    cfg = default_scheme_config()
    bad = next(t for t in cfg["transitions"] if t.get("radiative"))
    del bad["energy"]
    with pytest.raises(SchemeError, match="energy"):
        build_scheme(cfg)


def test_build_scheme_rejects_unknown_keys():
    cfg = default_scheme_config()
    cfg["transitions"][0]["ratee"] = 1.0
    with pytest.raises(SchemeError):
        build_scheme(cfg)


def _raw_scheme(states, transitions):
    return LevelScheme(
        states=tuple(states),
        transitions=tuple(transitions),
        fss_bright=36.0,
        fss_dark=5.0,
        spin_dephasing_time=3.0,
        reference_energy=1.3395,
    )


def test_validate_reports_disconnected_state():
    s = _raw_scheme(
        [QDState("g", "ground"), QDState("a", "bright-exciton"), QDState("b", "dark-exciton")],
        [
            Transition("g", "a", 1.0),
            Transition("a", "g", 1.0),
            Transition("b", "b", 1.0),
        ],
    )
    problems = validate(s)
    assert any("disconnected" in p and "'b'" in p for p in problems)


def test_validate_reports_polarization_on_nonradiative_arc():
    s = _raw_scheme(
        [QDState("g", "ground"), QDState("a", "bright-exciton")],
        [
            Transition("g", "a", 1.0, polarization="unpolarized"),
            Transition("a", "g", 1.0, radiative=True, photon_energy=0.0,
                       polarization="unpolarized"),
        ],
    )
    problems = validate(s)
    assert len(problems) == 1
    assert "g->a" in problems[0]


def test_validate_reports_missing_outgoing():
    s = _raw_scheme(
        [QDState("g", "ground"), QDState("a", "bright-exciton")],
        [Transition("g", "a", 1.0)],
    )
    assert any("no outgoing" in p for p in validate(s))


def test_config_round_trip_exact():
    original = default_paper_scheme()
    rebuilt = build_scheme(scheme_to_config(original))
    assert rebuilt == original


def test_yaml_file_round_trip(tmp_path):
    original = default_paper_scheme()
    path = tmp_path / "scheme.yaml"
    save_scheme(original, path)
    assert load_scheme(path) == original


def test_packaged_default_matches_code():
    from importlib import resources

    text = resources.files("dexsim.data").joinpath("default_scheme.yaml").read_text()
    assert build_scheme(yaml.safe_load(text)) == default_paper_scheme()


def test_each_radiative_transition_has_one_line(default_scheme):
    radiative = [t for t in default_scheme.transitions if t.radiative]
    assert len(default_scheme.lines) == len(radiative)
    assert len(set(default_scheme.line_ids)) == len(default_scheme.lines)
    for t in radiative:
        line = default_scheme.line(t.line_id)
        assert line.center == t.photon_energy


def test_doublet_branch_layout(default_scheme):
    x0 = default_scheme.line("X0->ground")
    xx0 = default_scheme.line("XX0->X0")
    assert x0.split == pytest.approx(36.0)
    assert xx0.split == pytest.approx(36.0)
    # cascade mirror ordering: H on the upper branch for the exciton,
    # on the lower branch for the biexciton feeding it
    assert x0.energy_h - x0.energy_v == pytest.approx(36.0)
    assert xx0.energy_h - xx0.energy_v == pytest.approx(-36.0)


def test_stationary_distribution_solves_generator(default_scheme):
    q = rate_matrix(default_scheme)
    pi = stationary_distribution(default_scheme)
    assert pi.sum() == pytest.approx(1.0)
    assert np.all(pi >= 0)
    assert np.abs(pi @ q).max() < 1e-12


def test_scheme_is_frozen(default_scheme):
    with pytest.raises(dataclasses.FrozenInstanceError):
        default_scheme.fss_bright = 1.0
