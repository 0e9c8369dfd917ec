import unittest
import logging
import math

import numpy as np

from walking import (
    OPEN,
    AgentKinematics,
    WalkParams,
    acceleration,
    advance,
    headway,
    hold_at_stop,
    ordered_headways,
    step_kinematics,
    stop_hold,
    throughput_bound,
)

logging.basicConfig(level=logging.INFO)


class TestWalking(unittest.TestCase):

    def setUp(self):
        self.params = WalkParams()
        logging.info("Setup complete")

    def test_params(self):
        logging.info("Testing WalkParams validation")
        self.assertEqual(self.params.min_gap, 0.5)
        with self.assertRaises(ValueError):
            WalkParams(body_radius=0.0)
        with self.assertRaises(ValueError):
            WalkParams(desired_speed=3.0, max_speed=2.0)
        logging.info("WalkParams validation passed")

    def test_headway(self):
        logging.info("Testing headway method")
        self.assertEqual(headway(AgentKinematics("l", 3.0), 10.0, []), OPEN)
        self.assertAlmostEqual(headway(AgentKinematics("l", 3.0), 10.0, [5.0, 1.0, 8.0]), 2.0)
        self.assertAlmostEqual(headway(AgentKinematics("l", 9.5), 10.0, [2.0], [1.5, 4.0]), 2.0)
        self.assertEqual(headway(AgentKinematics("l", 0.0), 30.0, [25.0]), OPEN)
        logging.info("headway method passed")

    def test_ordered_headways(self):
        logging.info("Testing ordered_headways method")
        gaps = ordered_headways(
            np.array([0, 0, 1]),
            np.array([1.0, 3.0, 2.0]),
            np.array([9.0, 7.0, 8.0]),
            np.array([np.inf, 1.5, np.inf]),
        )
        np.testing.assert_allclose(gaps[:2], [2.0, 8.5])
        self.assertTrue(math.isinf(gaps[2]))
        self.assertEqual(ordered_headways(np.zeros(0), np.zeros(0), np.zeros(0), np.zeros(0)).size, 0)
        logging.info("ordered_headways method passed")

    def test_free_flow(self):
        logging.info("Testing free-flow acceleration")
        speed, _ = advance(self.params.desired_speed, OPEN, self.params, 0.1)
        self.assertAlmostEqual(float(speed[0]), self.params.desired_speed, places=12)

        speed, distance = advance(0.0, OPEN, self.params, 0.1)
        self.assertAlmostEqual(float(speed[0]), 0.266, places=12)
        self.assertAlmostEqual(float(distance[0]), 0.0266, places=12)

        agent = AgentKinematics("l", 0.0, 0.0)
        speeds = []
        for _ in range(int(round(5 * self.params.relaxation_time / 0.1))):
            agent = step_kinematics(agent, OPEN, self.params)
            speeds.append(agent.speed)
        self.assertTrue(all(b >= a for a, b in zip(speeds, speeds[1:])))
        self.assertTrue(all(s <= self.params.desired_speed for s in speeds))
        self.assertLess(abs(speeds[-1] - self.params.desired_speed), 0.01 * self.params.desired_speed)
        logging.info("free-flow acceleration passed")

    def test_contact_braking(self):
        logging.info("Testing braking at contact distance")
        a = acceleration(np.array([1.0]), np.array([self.params.min_gap]), self.params)
        expected = (self.params.desired_speed - 1.0) / self.params.relaxation_time - self.params.repulsion_strength
        self.assertAlmostEqual(float(a[0]), expected, places=12)
        speed, distance = advance(np.array([0.0]), np.array([self.params.min_gap]), self.params, 0.1)
        self.assertEqual(float(speed[0]), 0.0)
        self.assertEqual(float(distance[0]), 0.0)
        with self.assertRaises(ValueError):
            step_kinematics(AgentKinematics("l", 0.0), OPEN, self.params, dt=0.0)
        logging.info("braking at contact distance passed")

    def test_platoon_invariants(self):
        logging.info("Testing platoon headway and ordering")
        rng = np.random.default_rng(4)
        offsets = np.cumsum(rng.uniform(0.5, 1.5, size=12))
        speeds = rng.uniform(0.0, 2.0, size=12)
        for step in range(600):
            gaps = ordered_headways(np.zeros(12), offsets, np.full(12, 1e6), np.full(12, np.inf))
            # leader stops for a while, followers queue behind it
            if 100 <= step < 300:
                gaps[-1] = self.params.min_gap
            speeds, distance = advance(speeds, gaps, self.params, 0.1)
            offsets = offsets + distance
            self.assertTrue(np.all(np.diff(offsets) >= self.params.min_gap - 1e-9))
            self.assertTrue(np.all((speeds >= 0.0) & (speeds <= self.params.max_speed)))
        logging.info("platoon headway and ordering passed")

    def test_stop_line(self):
        logging.info("Testing hold_at_stop method")
        offsets, speeds, held = hold_at_stop(
            np.array([49.9, 40.0, 50.5]), np.array([50.1, 40.1, 50.6]), np.array([1.3, 1.0, 1.3]), 50.0, True
        )
        np.testing.assert_array_equal(held, [True, False, False])
        np.testing.assert_allclose(offsets, [50.0, 40.1, 50.6])
        np.testing.assert_allclose(speeds, [0.0, 1.0, 1.3])

        _, _, held = hold_at_stop(np.array([49.9]), np.array([50.1]), np.array([1.3]), 50.0, False)
        self.assertFalse(held[0])

        before = AgentKinematics("l", 49.95, 1.2)
        after, is_held = stop_hold(before, step_kinematics(before, OPEN, self.params), 50.0)
        self.assertTrue(is_held)
        self.assertEqual((after.offset, after.speed), (50.0, 0.0))
        logging.info("hold_at_stop method passed")

    def test_throughput_bound(self):
        logging.info("Testing throughput_bound method")
        self.assertAlmostEqual(throughput_bound(1.0, self.params), 8.0)
        self.assertAlmostEqual(throughput_bound(3.0, WalkParams(body_radius=0.5)), 6.0)
        logging.info("throughput_bound method passed")


if __name__ == '__main__':
    unittest.main()
