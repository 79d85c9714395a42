"""Twist-blurring similarity matrices: bounds, layouts, builders, products."""

import pytest

from cfikit.basegraph import catalog_graph, prism3
from cfikit.blurer import basic_blurer, blurer_for, transform
from cfikit.cfi import TwistFunction, build_cfi
from cfikit.gf2 import matrix_predicates, verify_blur
from cfikit.orbits import ResourceError, orbit_partition
from cfikit.similarity import (
    AuditError,
    BoundParams,
    SimilarityError,
    StarLayout,
    active_region_check,
    build_S_1ary,
    build_S_kary,
    classify_component,
    degree_bound,
    modulus_exponent,
    product_left_sum_check,
    product_middle_sum_check,
    product_split_check,
    star_radius,
    tau_map,
    twist_exponent,
)


def test_recursion_bounds():
    assert star_radius(1) == 1
    assert star_radius(2) == 6
    assert star_radius(3) == 26
    assert twist_exponent(1) == 1
    assert twist_exponent(2) == 3
    assert modulus_exponent(1) == 2
    assert modulus_exponent(2) == 4
    assert degree_bound(1, 0) == 3
    assert degree_bound(2, 0) == 7
    assert degree_bound(1, 1) == 4


def test_bound_params():
    p = BoundParams.for_arity(2, 0)
    assert (p.radius, p.twist_exp, p.modulus_exp, p.degree) == (6, 3, 4, 7)


def test_star_layout_choose_petersen():
    lay = StarLayout.choose(catalog_graph("petersen"), 2, 6, 9, 3)
    assert lay.center == 0
    assert lay.arms == ((0, 1, 6, 9), (0, 4, 3, 8), (0, 5, 7, 2))
    assert lay.d == 3
    assert lay.tip(0) == 6 and lay.outer_tip(0) == 9
    assert lay.tip_edge(0) == (6, 9)
    # Petersen arms are far too short for the arity-2 radius bound.
    assert not lay.radius_ok()


def test_star_layout_from_paths_validation():
    base = catalog_graph("petersen")
    with pytest.raises(SimilarityError):
        # Arms must share their first vertex (the center).
        StarLayout.from_paths(base, 2, [(0, 1, 6, 9), (4, 3, 8, 5)])
    with pytest.raises(SimilarityError):
        # Arm must walk along edges.
        StarLayout.from_paths(base, 2, [(0, 9, 6, 1)])


def test_classify_component():
    lay = StarLayout.choose(catalog_graph("petersen"), 2, 6, 9, 3)
    assert classify_component(lay, {0}).kind == "star-center"
    one = classify_component(lay, {1})
    assert one.kind == "star" and one.arm == 1 and one.is_star
    tip = classify_component(lay, {3, 8})
    assert tip.kind == "tip" and tip.arm == 2 and tip.is_tip
    assert classify_component(lay, {9}).kind == "sky"


def test_tau_map_zero_shifts_is_identity():
    base = catalog_graph("petersen")
    lay = StarLayout.choose(base, 2, 6, 9, 3)
    s = build_cfi(base, 2, TwistFunction.zero(base, 2))
    u = (0, s.gadget_ids(3).start + 2)
    assert tau_map(s, lay, [0, 0, 0], u) == u


def _twisted_pair(name, q, t, t_prime, theta):
    base = catalog_graph(name)
    a = build_cfi(base, q, TwistFunction.zero(base, q))
    b = build_cfi(base, q, TwistFunction.zero(base, q).with_edge(t, t_prime, theta))
    return a, b


def test_arity1_blur_k4():
    a, b = _twisted_pair("K4", 2, 0, 1, 2)
    blurer = basic_blurer("arity1", q=2, d=3)
    build = build_S_1ary(a, b, (), 0, 1, blurer)
    s = build.matrix
    assert s.to_dense().shape == (64, 64)
    assert s.rank() == 64
    assert matrix_predicates(s).all_hold
    report = verify_blur(
        s, orbit_partition(a, (), 2), orbit_partition(b, (), 2)
    )
    assert report.ok and report.invertible
    assert active_region_check(s, {0})
    assert not active_region_check(s, {2})
    assert build.audit.ok


def test_arity1_blur_q3():
    a, b = _twisted_pair("K4", 3, 0, 1, 4)
    blurer = blurer_for(1, 3, 4, 3)
    build = build_S_1ary(a, b, (), 0, 1, blurer)
    report = verify_blur(
        build.matrix, orbit_partition(a, (), 2), orbit_partition(b, (), 2)
    )
    assert report.ok and report.invertible


def test_arity1_audit_failures_raise():
    a, b = _twisted_pair("K4", 2, 0, 1, 2)
    wrong = blurer_for(1, 3, 4, 3)  # modulus does not match the structures
    with pytest.raises(AuditError) as err:
        build_S_1ary(a, b, (), 0, 1, wrong)
    failed = {check.name for check in err.value.report.failures}
    assert failed
    # The same build goes through with an override, flagged as overridden.
    build = build_S_1ary(a, b, (), 0, 1, wrong, override_audit=True)
    assert build.audit.overridden
    assert not build.audit.ok


def test_arity1_audit_rejects_close_pebble():
    a, b = _twisted_pair("K4", 2, 0, 1, 2)
    # Every K4 vertex is adjacent to t, so any pebble is too close.
    pebble = a.gadget_ids(2).start
    with pytest.raises(AuditError) as err:
        build_S_1ary(a, b, (pebble,), 0, 1, basic_blurer("arity1", q=2, d=3))
    assert any(c.name == "pebble-distance" for c in err.value.report.failures)


def test_product_identities_prism():
    # Two (then three) single-edge twists with hubs 0, 1, 5: the 3-prism
    # splits as {0,2,4} vs {1,3,5} around the first two active regions.
    base = prism3()
    q = 2
    f0 = TwistFunction.zero(base, q)
    f1 = f0.with_edge(0, 2, 2)
    f2 = f1.with_edge(1, 3, 2)
    f3 = f2.with_edge(5, 3, 2)
    a0, a1, a2, a3 = (build_cfi(base, q, f) for f in (f0, f1, f2, f3))
    blurer = basic_blurer("arity1", q=2, d=3)
    s1 = build_S_1ary(a0, a1, (), 0, 2, blurer).matrix
    s2 = build_S_1ary(a1, a2, (), 1, 3, blurer).matrix
    s3 = build_S_1ary(a2, a3, (), 5, 3, blurer).matrix
    n = a0.size
    pairs = [((i,), (j,)) for i in range(n) for j in range(n)]
    assert product_split_check(s1, s2, {0, 2, 4}, {1, 3, 5}, pairs)
    assert product_left_sum_check(s1, s2, {0, 2, 4}, pairs)
    assert product_middle_sum_check(s1, s2, s3, {1}, pairs)
    st = s1.multiply(s2)
    assert active_region_check(st, {0, 1})
    assert not active_region_check(st, {0})
    # The composite blurs the two-edge composite twist.
    report = verify_blur(st, orbit_partition(a0, (), 2), orbit_partition(a2, (), 2))
    assert report.ok and report.invertible


def test_product_split_negative():
    # Swapping the sides misattributes the mixing positions and must fail.
    base = prism3()
    q = 2
    f0 = TwistFunction.zero(base, q)
    f1 = f0.with_edge(0, 2, 2)
    f2 = f1.with_edge(1, 3, 2)
    a0, a1, a2 = (build_cfi(base, q, f) for f in (f0, f1, f2))
    blurer = basic_blurer("arity1", q=2, d=3)
    s1 = build_S_1ary(a0, a1, (), 0, 2, blurer).matrix
    s2 = build_S_1ary(a1, a2, (), 1, 3, blurer).matrix
    n = a0.size
    pairs = [((i,), (j,)) for i in range(n) for j in range(n)]
    assert not product_split_check(s1, s2, {1, 3, 5}, {0, 2, 4}, pairs)


def test_kary_arity3_is_out_of_reach():
    a, b = _twisted_pair("petersen", 3, 6, 9, 4)
    with pytest.raises(ResourceError):
        build_S_kary(a, b, (), 6, 9, 3, override_audit=True)


def test_kary_delegates_to_1ary():
    a, b = _twisted_pair("K4", 2, 0, 1, 2)
    direct = build_S_1ary(a, b, (), 0, 1, basic_blurer("arity1", q=2, d=3))
    via_kary = build_S_kary(a, b, (), 0, 1, 1)
    assert via_kary.matrix.first_mismatch(direct.matrix) is None
