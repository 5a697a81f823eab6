#!/usr/bin/env python3
"""
Tests for the Invariant Validation Suite
========================================
"""

import unittest
from unittest import mock

from tests.helpers import FAST_SETTINGS
from validation import ValidationSuite, check_bit_order, check_min_steps, check_sector_dimensions


class TestValidationSuite(unittest.TestCase):

    def test_structural_checks_pass(self):
        for check in (check_sector_dimensions, check_bit_order, check_min_steps):
            passed, detail = check()
            self.assertTrue(passed, detail)

    def test_full_suite_passes(self):
        results = ValidationSuite(FAST_SETTINGS).run()
        self.assertEqual(len(results), 12)
        failures = [(r.name, r.detail) for r in results if not r.passed]
        self.assertEqual(failures, [])

    def test_crashing_check_is_a_failure(self):
        def broken():
            raise RuntimeError("boom")

        suite = ValidationSuite(FAST_SETTINGS)
        with mock.patch.object(suite, "checks", return_value=[("broken", broken), ("ok", lambda: (True, "fine"))]):
            with self.assertLogs("validation", level="ERROR"):
                results = suite.run()
        self.assertFalse(results[0].passed)
        self.assertEqual(results[0].detail, "RuntimeError: boom")
        self.assertTrue(results[1].passed)


if __name__ == "__main__":
    unittest.main()
