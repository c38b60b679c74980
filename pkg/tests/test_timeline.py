import pytest

from segaug.timeline import Block, Timeline, TimelineError, frame_to_doc_time


def test_frame_inside_block():
    tl = Timeline([Block(0, 100, 5.0)], 0.02)
    assert frame_to_doc_time(50, tl) == pytest.approx(6.0)
    assert frame_to_doc_time(0, tl) == 5.0


def test_frame_beyond_last_block():
    tl = Timeline([Block(0, 100, 5.0)], 0.02)
    with pytest.raises(TimelineError):
        frame_to_doc_time(100, tl)
    with pytest.raises(TimelineError):
        frame_to_doc_time(-1, tl)


def test_second_block_uses_its_own_start():
    tl = Timeline([Block(0, 10, 1.0), Block(10, 10, 7.0)], 0.1)
    assert tl.time_of(12) == pytest.approx(7.2)
    assert tl.end_time_of(12) == pytest.approx(7.3)


@pytest.mark.parametrize(
    "blocks",
    [
        [Block(0, 10, 0.0), Block(11, 5, 2.0)],  # hole in frame range
        [Block(0, 10, 1.0), Block(10, 5, 1.0)],  # start not increasing
        [Block(0, 10, 0.0), Block(10, 5, 0.1)],  # time ranges overlap
    ],
)
def test_invalid_timelines(blocks):
    with pytest.raises(TimelineError):
        Timeline(blocks, 0.02)
