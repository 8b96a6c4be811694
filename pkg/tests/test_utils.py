"""
Sparse2Dense - Utils and Logger Tests
Unit tests for shared helpers and the structured logger.
"""

import json
import math
import pytest
from pathlib import Path
import sys

sys.path.insert(0, str(Path(__file__).parent.parent / 'src'))

from src.modules.errors import ConfigError
from src.modules.logger import Logger, LogLevel
from src.utils import Utils


class TestUtils:
    """Tests for Utils helpers."""

    @pytest.mark.parametrize('text, expected', [
        ('25', (25, 1)), ('30000/1001', (30000, 1001)), (' 50/2 ', (50, 2)),
    ])
    def test_parse_fps(self, text, expected):
        assert Utils.parse_fps(text) == expected

    @pytest.mark.parametrize('text', ['fast', '1/2/3', '0', '25/0', '70000/1'])
    def test_parse_fps_rejects(self, text):
        with pytest.raises(ConfigError):
            Utils.parse_fps(text)

    def test_parallel_map_keeps_order(self):
        assert Utils.parallel_map(lambda x: x * x, range(20), max_workers=4) == \
            [x * x for x in range(20)]

    def test_parallel_map_raises_earliest(self):
        def fail_on_odd(x):
            if x % 2:
                raise ValueError(str(x))
            return x
        with pytest.raises(ValueError, match='^1$'):
            Utils.parallel_map(fail_on_odd, range(6), max_workers=3)

    def test_parallel_map_empty(self):
        assert Utils.parallel_map(str, []) == []

    @pytest.mark.parametrize('bits, text', [
        (9, '9 bits'), (8 * 1024, '1.00 KB'), (8 * 1536 * 1024, '1.50 MB'),
    ])
    def test_bits_human(self, bits, text):
        assert Utils.get_bits_human(bits) == text

    def test_json_safe(self):
        data = Utils.json_safe({'a': [math.inf, -math.inf, 1.5], 'b': math.nan})
        assert data == {'a': ['inf', '-inf', 1.5], 'b': 'nan'}
        assert json.loads(Utils.to_json(data))['b'] == 'nan'


class TestLogger:
    """Tests for the singleton Logger."""

    @pytest.fixture
    def logger(self):
        logger = Logger.get_instance()
        previous = logger.level
        logger.set_level(LogLevel.DEBUG)
        logger.clear()
        yield logger
        logger.clear()
        logger.set_level(previous)

    def test_singleton(self):
        assert Logger() is Logger.get_instance()

    def test_structured_fields(self, logger):
        logger.info("Coded frame", frame=3, bits=120)
        entry = logger.get_entries()[-1]
        assert entry.message == "Coded frame"
        assert entry.extra == {'frame': 3, 'bits': 120}
        assert entry.to_string().endswith("Coded frame frame=3 bits=120")

    def test_level_filter(self, logger):
        logger.set_level('warn')
        logger.info("dropped")
        logger.error("kept")
        assert [e.message for e in logger.get_entries()] == ["kept"]

    def test_entry_filtering(self, logger):
        logger.debug("a")
        logger.warn("b")
        assert [e.message for e in logger.get_entries(level=LogLevel.WARN)] == ["b"]
        assert [e.message for e in logger.get_entries(limit=1)] == ["b"]

    def test_level_from_string(self):
        assert LogLevel.from_string('WARNING') is LogLevel.WARN
        assert LogLevel.from_string('bogus') is LogLevel.INFO

    def test_export_json(self, logger, tmp_path):
        logger.info("hello", k=1)
        path = tmp_path / 'log.json'
        assert logger.export_json(path)
        data = json.loads(path.read_text(encoding='utf-8'))
        assert data['total_entries'] == 1
        assert data['entries'][0]['extra'] == {'k': 1}

    def test_export_txt(self, logger, tmp_path):
        logger.warn("careful")
        path = tmp_path / 'log.txt'
        assert logger.export_txt(path)
        assert "careful" in path.read_text(encoding='utf-8')


if __name__ == '__main__':
    pytest.main([__file__, '-v'])
