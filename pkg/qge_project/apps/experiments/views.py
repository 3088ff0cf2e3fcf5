from rest_framework import viewsets

from .models import ExperimentRun
from .serializers import ExperimentRunDetailSerializer, ExperimentRunSerializer


class ExperimentRunViewSet(viewsets.ReadOnlyModelViewSet):
    """Stored study results. Read-only: runs are created by the management commands."""

    queryset = ExperimentRun.objects.all()

    def get_queryset(self):
        queryset = super().get_queryset()
        for field in ('kind', 'problem', 'status'):
            value = self.request.query_params.get(field)
            if value:
                queryset = queryset.filter(**{field: value})
        if self.action == 'retrieve':
            queryset = queryset.prefetch_related('rows')
        return queryset

    def get_serializer_class(self):
        if self.action == 'retrieve':
            return ExperimentRunDetailSerializer
        return ExperimentRunSerializer
