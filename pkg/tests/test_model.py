"""Model-layer units: validation findings, flattening, time conversion."""

import math

import pytest

from adequa import (
    AlgorithmGraph,
    Block,
    BlockKind,
    DataType,
    Dependency,
    DepStrength,
    Direction,
    DomainError,
    FlattenError,
    Operator,
    Port,
    flatten,
    hyperperiod,
    parse_algorithm,
    time_convert,
    validate_algorithm,
    validate_architecture,
    parse_architecture,
)


AVR = Operator("node3", "avr", clock_hz=14_745_600.0, cycles_per_stu=1000)


def codes(findings):
    return sorted(f.code for f in findings)


def algo(body, header="def algorithm t :"):
    return parse_algorithm(f"{header}\n{body}\nend")


# ---------------------------------------------------------------- validation

def test_clean_graph_has_no_findings():
    g = algo("""
      sensor S : ! uint8[1] v 1 duration avr=1;
      actuator A : ? uint8[1] v 1 duration avr=1;
      S.v -> A.v;
    """)
    assert validate_algorithm(g) == []


def test_duplicate_block_name():
    # the parser refuses duplicates, so build the graph by hand
    c = Block("C", BlockKind.CONSTANT,
              ports=(Port("v", Direction.OUTPUT, "uint8"),))
    g = AlgorithmGraph(blocks=[c, c])
    assert "DUPLICATE_NAME" in codes(validate_algorithm(g))


def test_sensor_with_input_is_flagged():
    g = AlgorithmGraph(blocks=[
        Block("S", BlockKind.SENSOR,
              ports=(Port("x", Direction.INPUT, "uint8"),))])
    assert "SENSOR_INPUT" in codes(validate_algorithm(g))


def test_actuator_with_output_is_flagged():
    g = AlgorithmGraph(blocks=[
        Block("A", BlockKind.ACTUATOR,
              ports=(Port("x", Direction.OUTPUT, "uint8"),))])
    assert "ACTUATOR_OUTPUT" in codes(validate_algorithm(g))


def test_delay_must_have_one_in_one_out_same_type():
    g = algo("""
      delay D : ? uint8[1] a 1, ? uint8[1] b 2, ! uint8[1] q 1;
    """)
    assert "DELAY_SHAPE" in codes(validate_algorithm(g))
    g2 = algo("""
      delay D : ? uint8[1] a 1, ! uint16[1] q 1;
    """)
    assert "DELAY_SHAPE" in codes(validate_algorithm(g2))


def test_dangling_dependency_endpoints():
    g = algo("""
      sensor S : ! uint8[1] v 1;
      S.v -> Nowhere.v;
    """)
    assert "DANGLING" in codes(validate_algorithm(g))
    g2 = algo("""
      sensor S : ! uint8[1] v 1;
      actuator A : ? uint8[1] v 1;
      S.missing -> A.v;
    """)
    assert "DANGLING" in codes(validate_algorithm(g2))


def test_type_and_width_mismatch():
    g = algo("""
      sensor S : ! uint16[1] v 1;
      actuator A : ? uint8[1] v 1;
      S.v -> A.v;
    """)
    assert "TYPE_MISMATCH" in codes(validate_algorithm(g))
    g2 = algo("""
      sensor S : ! uint8[4] v 1;
      actuator A : ? uint8[2] v 1;
      S.v -> A.v;
    """)
    assert "WIDTH_MISMATCH" in codes(validate_algorithm(g2))


def test_two_writers_on_one_input():
    g = algo("""
      sensor S : ! uint8[1] v 1;
      constant C : ! uint8[1] v 1;
      actuator A : ? uint8[1] v 1;
      S.v -> A.v;
      C.v -> A.v;
    """)
    assert "MULTI_FEED" in codes(validate_algorithm(g))


def test_pure_function_cycle_is_rejected():
    g = algo("""
      function F : ? uint8[1] a 1, ! uint8[1] q 1 duration avr=1;
      function G : ? uint8[1] a 1, ! uint8[1] q 1 duration avr=1;
      F.q -> G.a;
      G.q -> F.a;
    """)
    assert "CYCLE" in codes(validate_algorithm(g))


def test_cycle_through_delay_is_legal():
    # a discrete integrator: sum feeding a unit delay feeding the sum
    g = algo("""
      function Sum : ? uint8[1] a 1, ? uint8[1] prev 2, ! uint8[1] q 1 duration avr=1;
      delay Z : ? uint8[1] d 1, ! uint8[1] q 1 duration avr=1;
      constant C : ! uint8[1] v 1 duration avr=1;
      C.v -> Sum.a;
      Sum.q -> Z.d;
      Z.q -> Sum.prev;
    """)
    assert validate_algorithm(g) == []


def test_architecture_findings():
    a = parse_architecture("""
      operator n0 : type avr clock 1000 stu 10 gates a;
      operator n1 : type avr clock 1000 stu 10 gates a;
      medium m0 : kind sam_ptp attach n0.a,n1.a,n0.a duration uint8=1;
      medium m1 : kind sam_ptp attach n0.z,n1.a duration uint8=1;
    """)
    found = codes(validate_architecture(a))
    assert "ARITY" in found           # three attachment points on a ptp link
    assert "UNRESOLVED_GATE" in found # n0.z does not exist
    assert "GATE_REUSE" in found      # n0.a and n1.a claimed twice


# ------------------------------------------------------------------ flatten

def test_flatten_splices_super_block():
    g = parse_algorithm("""
    def algorithm t period 10 :
      sensor S : ! uint8[1] v 1 duration avr=1;
      super Sub {
        ? uint8[1] x 1;
        ! uint8[1] y 1;
        function F : ? uint8[1] a 1, ! uint8[1] q 1 duration avr=1;
        function G : ? uint8[1] a 1, ! uint8[1] q 1 duration avr=1;
        self.x -> F.a;
        F.q -> G.a;
        G.q -> self.y;
      }
      actuator A : ? uint8[1] v 1 duration avr=1;
      S.v -> Sub.x;
      Sub.y -> A.v;
    end
    """)
    f = flatten(g)
    names = {b.name for b in f.blocks}
    assert names == {"S", "Sub/F", "Sub/G", "A"}
    edges = {(d.from_block, d.from_port, d.to_block, d.to_port)
             for d in f.deps}
    assert edges == {
        ("S", "v", "Sub/F", "a"),
        ("Sub/F", "q", "Sub/G", "a"),
        ("Sub/G", "q", "A", "v"),
    }
    # body blocks inherit the graph default period through the super
    assert all(f.effective_period(b) == 10 for b in f.blocks)


def test_flatten_is_identity_without_supers():
    g = algo("""
      sensor S : ! uint8[1] v 1;
      actuator A : ? uint8[1] v 1;
      S.v -> A.v;
    """)
    f = flatten(g)
    assert {b.name for b in f.blocks} == {"S", "A"}
    assert len(f.deps) == 1


def test_flatten_pid_super_hand_expanded():
    """The worked 11-block controller, expanded by hand."""
    g = parse_algorithm(open("models/mono_fan.adm").read())
    f = flatten(g)
    assert len(f.blocks) == 11 + 4  # body plus timer, sensor, setpoint, fan
    edges = {(d.from_block, d.to_block) for d in f.deps
             if d.strength is DepStrength.DATA}
    expected = {
        ("SetPoint", "Pid/errSum"),
        ("FanSensor", "Pid/errSum"),
        ("Pid/errSum", "Pid/kpGain"),
        ("Pid/errSum", "Pid/kiGain"),
        ("Pid/errSum", "Pid/diffSum"),
        ("Pid/errSum", "Pid/errDelay"),
        ("Pid/kiGain", "Pid/awFreeze"),
        ("Pid/intDelay", "Pid/awFreeze"),
        ("Pid/awFreeze", "Pid/intSum"),
        ("Pid/intDelay", "Pid/intSum"),
        ("Pid/intSum", "Pid/intDelay"),
        ("Pid/errDelay", "Pid/diffSum"),
        ("Pid/diffSum", "Pid/kdGain"),
        ("Pid/kpGain", "Pid/outSum"),
        ("Pid/intSum", "Pid/outSum"),
        ("Pid/kdGain", "Pid/outSum"),
        ("Pid/outSum", "Pid/outSat"),
        ("Pid/outSat", "FanActuator"),
    }
    assert edges == expected
    prec = {(d.from_block, d.to_block) for d in f.deps
            if d.strength is DepStrength.PRECEDENCE}
    assert prec == {("PeriodTimer", "FanSensor")}
    assert validate_algorithm(f) == []


def test_flatten_rejects_boundary_port_unused_by_body():
    g = parse_algorithm("""
    def algorithm t :
      super Sub {
        ? uint8[1] x 1;
        function F : ! uint8[1] q 1;
      }
    end
    """)
    with pytest.raises(FlattenError) as err:
        flatten(g)
    assert err.value.code == "FLATTEN_DANGLING"


# -------------------------------------------------------------- time algebra

def test_hyperperiod_of_harmonic_set():
    assert hyperperiod([5, 10, 20]) == 20
    assert hyperperiod([7]) == 7


def test_time_convert_seconds_to_cycles_exact():
    assert time_convert(0.005, "seconds", "cycles", AVR) == 73728.0


def test_time_convert_stu_to_seconds():
    ms = time_convert(80, "stu", "seconds", AVR) * 1e3
    assert math.isclose(ms, 5.4253, abs_tol=0.01)


def test_time_convert_round_trips():
    v = time_convert(123, "stu", "cycles", AVR)
    assert time_convert(v, "cycles", "stu", AVR) == 123


def test_time_convert_rejects_bad_units_and_negatives():
    with pytest.raises(DomainError):
        time_convert(1.0, "fortnights", "stu", AVR)
    with pytest.raises(DomainError):
        time_convert(-1.0, "stu", "cycles", AVR)


def test_duration_lookup_prefers_instance_over_type():
    b = Block("F", BlockKind.FUNCTION,
              durations={"avr": 5, "node3": 2})
    assert b.duration_on(AVR) == 2
    b2 = Block("F", BlockKind.FUNCTION, durations={"avr": 5})
    assert b2.duration_on(AVR) == 5
    assert b2.duration_on(Operator("pc", "i386")) is None
