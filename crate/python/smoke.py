"""Smoke test for the huro_teleop extension module.

Build and install with `pip install . --no-build-isolation` (or
`maturin develop`), then run `python python/smoke.py`.
"""

import json
import pathlib

import huro_teleop as ht

ROOT = pathlib.Path(__file__).resolve().parent.parent


def frame(env):
    return ht.encode_envelope(env).encode()


def main():
    # Wire codec.
    env = {"op": "publish", "topic": ht.TOPICS["cmd"], "msg": {"action": "turn_left"}}
    text = ht.encode_envelope(env)
    assert text.startswith('{"op":"publish","topic":"/teleop/cmd"'), text
    assert ht.decode_envelope(text.encode()) == env
    try:
        ht.decode_envelope(b'{"op":"dance","topic":"/x"}')
    except ValueError as e:
        assert str(e).startswith("UnknownOp"), e
    else:
        raise AssertionError("unknown op accepted")
    cmd = ht.validate_command(
        {"action": "set_coefficients", "coefficients": {"step_m": 9, "turn_rad": 0.3, "shift_m": 0.05}}
    )
    assert cmd["coefficients"]["step_m"] == 0.5

    # Course geometry.
    course = ht.Course.from_json((ROOT / "courses" / "fira_obstacle_run.json").read_text())
    assert [o["id"] for o in course.obstacles] == ["hurdle_a", "pillar", "hurdle_b"]
    assert course.check_contact(1.5, 1.3, ht.ROBOT_RADIUS) == ["hurdle_a"]
    assert course.sweep_contact(1.5, 0.4, 1.5, 1.0, ht.ROBOT_RADIUS) == []
    assert abs(course.cast_ray(1.5, 0.4, 1.5707963267948966) - 1.0) < 1e-9
    moved = course.move_obstacle("pillar", 0.1, 0.0)
    assert moved != course and ht.Course.from_json(moved.to_json()) == moved

    # Simulator and camera.
    robot = ht.Robot(course)
    for _ in range(3):
        robot.apply({"action": "walk_forward"})
    x, y, _ = robot.pose
    assert abs(y - 0.7) < 1e-9, robot.pose
    events = robot.apply({"action": "get_up"})
    assert events[0]["event"] == "rejected", events
    jpeg = robot.render_jpeg(quality=80)
    assert jpeg[:2] == b"\xff\xd8" and jpeg[-2:] == b"\xff\xd9"
    part = ht.mjpeg_part(jpeg)
    assert part.startswith(b"--frame\r\nContent-Type: image/jpeg\r\nContent-Length: %d\r\n\r\n" % len(jpeg))

    # Hub: two sessions, one drives, one watches.
    hub = ht.Hub(course)
    driver, viewer = hub.connect(), hub.connect()
    hub.handle_frame(viewer, frame({"op": "subscribe", "topic": ht.TOPICS["state"]}))
    hub.handle_frame(driver, frame({"op": "publish", "topic": ht.TOPICS["cmd"], "msg": {"action": "walk_forward"}}))
    assert hub.pending() == 1
    out = hub.tick(0.05)
    assert [s for s, _ in out] == [viewer], out
    state = json.loads(out[0][1])["msg"]
    assert abs(state["y"] - 0.5) < 1e-9 and state["contact_count"] == 0
    bad = hub.handle_frame(driver, b"{nope")
    assert bad[0][0] == driver and json.loads(bad[0][1])["op"] == "status"

    print("huro_teleop smoke test passed")


if __name__ == "__main__":
    main()
