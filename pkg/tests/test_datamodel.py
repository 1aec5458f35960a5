import numpy as np
import pytest

from splshot.datamodel import (
    Branch,
    Candidate,
    CandidateState,
    InvariantViolation,
    LabelSpace,
    Sample,
    ViewAngles,
)


def _sample(sid=0, label=3, d_feat=4):
    return Sample(
        id=sid,
        features=np.zeros(d_feat),
        label=label,
        keypoints=np.zeros(30),
        texture=np.zeros(2),
        pose=np.zeros(2),
        view=ViewAngles(0.0, 0.0, 0.0),
    )


class TestLabelSpace:
    def test_all_labels_is_union(self):
        ls = LabelSpace(base_labels=(0, 1), novel_labels=(2, 3, 4))
        assert ls.all_labels == (0, 1, 2, 3, 4)
        assert ls.is_novel(3) and not ls.is_novel(0)


class TestViewAngles:
    def test_as_array(self):
        v = ViewAngles(0.1, 0.2, 0.3)
        assert np.array_equal(v.as_array(), [0.1, 0.2, 0.3])


class TestCandidateLifecycle:
    def test_pose_candidate_requires_donor(self):
        with pytest.raises(InvariantViolation):
            Candidate(id=1, sample=_sample(), branch=Branch.POSE, source_id=0)

    def test_view_candidate_rejects_donor(self):
        with pytest.raises(InvariantViolation):
            Candidate(id=1, sample=_sample(), branch=Branch.VIEW, source_id=0, donor_id=9)

    def test_select_then_dismiss_forbidden(self):
        c = Candidate(id=1, sample=_sample(), branch=Branch.VIEW, source_id=0)
        c.mark_selected()
        assert c.state is CandidateState.SELECTED
        with pytest.raises(InvariantViolation):
            c.mark_dismissed()
        with pytest.raises(InvariantViolation):
            c.mark_selected()

    def test_dismiss_then_select_forbidden(self):
        c = Candidate(id=1, sample=_sample(), branch=Branch.VIEW, source_id=0)
        c.mark_dismissed()
        with pytest.raises(InvariantViolation):
            c.mark_selected()

    def test_state_never_revisits_available(self):
        """Replaying any sequence of transitions never returns to AVAILABLE."""
        for first in ("mark_selected", "mark_dismissed"):
            c = Candidate(id=1, sample=_sample(), branch=Branch.VIEW, source_id=0)
            getattr(c, first)()
            assert c.state is not CandidateState.AVAILABLE
            for second in ("mark_selected", "mark_dismissed"):
                with pytest.raises(InvariantViolation):
                    getattr(c, second)()
            assert c.state is not CandidateState.AVAILABLE
