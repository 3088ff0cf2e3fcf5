from django.contrib import admin
from .models import ConvergenceRow, ExperimentRun


class ConvergenceRowInline(admin.TabularInline):
    model = ConvergenceRow
    extra = 0
    can_delete = False
    fields = ('position', 'method', 'H', 'h', 'dofs_h', 'e_L2', 'e_H1', 'e_H2', 'order_H2', 'time_s', 'converged')
    readonly_fields = fields


@admin.register(ExperimentRun)
class ExperimentRunAdmin(admin.ModelAdmin):
    list_display = ('kind', 'problem', 'reynolds', 'rossby', 'status', 'acceptance_passed', 'created_at')
    list_filter = ('kind', 'problem', 'status', 'acceptance_passed', 'created_at')
    search_fields = ('problem', 'kind')
    date_hierarchy = 'created_at'
    readonly_fields = ('created_at',)
    inlines = [ConvergenceRowInline]

    fieldsets = (
        ('Study', {
            'fields': ('kind', 'problem', 'method', 'status', 'acceptance_passed')
        }),
        ('Flow parameters', {
            'fields': ('reynolds', 'rossby')
        }),
        ('Configuration', {
            'fields': ('config', 'metadata'),
            'classes': ('collapse',),
            'description': 'Exact configuration and environment of the run'
        }),
        ('Metadata', {
            'fields': ('created_at',),
            'classes': ('collapse',)
        }),
    )


@admin.register(ConvergenceRow)
class ConvergenceRowAdmin(admin.ModelAdmin):
    list_display = ('run', 'position', 'method', 'h', 'H', 'e_H2', 'order_H2', 'time_s', 'converged')
    list_filter = ('method', 'converged', 'run__kind')
