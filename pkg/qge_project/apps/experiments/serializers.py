from rest_framework import serializers

from .models import ConvergenceRow, ExperimentRun


class ConvergenceRowSerializer(serializers.ModelSerializer):
    class Meta:
        model = ConvergenceRow
        fields = [
            'position', 'method', 'H', 'h', 'dofs_H', 'dofs_h',
            'e_L2', 'order_L2', 'e_H1', 'order_H1', 'e_H2', 'order_H2',
            'time_s', 'converged', 'iterations',
        ]


class ExperimentRunSerializer(serializers.ModelSerializer):
    class Meta:
        model = ExperimentRun
        fields = [
            'id', 'kind', 'problem', 'method', 'reynolds', 'rossby',
            'status', 'acceptance_passed', 'created_at',
        ]


class ExperimentRunDetailSerializer(ExperimentRunSerializer):
    rows = ConvergenceRowSerializer(many=True, read_only=True)

    class Meta(ExperimentRunSerializer.Meta):
        fields = ExperimentRunSerializer.Meta.fields + ['config', 'metadata', 'rows']
